#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "irslab/series.hpp"

using namespace irslab;

namespace {

ResultSeries sample() {
    ResultSeries s;
    s.name = "curve";
    s.x_name = "gbar_db";
    s.x = {-10.0, -9.5, 0.0, 1e-300, 12.25};
    s.add("outage", {0.5, 0.1, 1.0 / 3.0, 5e-324, 0.0});
    s.add("odd, \"name\"", {1, 2, 3, 4, std::numeric_limits<double>::max()});
    return s;
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
    const auto s = sample();
    std::istringstream in(to_csv_string(s));
    auto back = read_csv(in);
    back.name = s.name;
    EXPECT_EQ(back, s);
}

TEST(Csv, HeaderQuotingAndLineEndings) {
    const auto text = to_csv_string(sample());
    EXPECT_EQ(text.substr(0, text.find("\r\n")), "gbar_db,outage,\"odd, \"\"name\"\"\"");
    EXPECT_NE(text.find("\r\n-9.5,0.1,2\r\n"), std::string::npos);
}

TEST(Csv, ReaderAcceptsLfAndMultilineQuotes) {
    std::istringstream in("x,\"a\nb\"\n1,2\n\n3,4\n");
    const auto s = read_csv(in);
    ASSERT_EQ(s.columns.size(), 1u);
    EXPECT_EQ(s.columns[0].name, "a\nb");
    EXPECT_EQ(s.x, (std::vector<double>{1, 3}));
    EXPECT_EQ(s.columns[0].values, (std::vector<double>{2, 4}));
}

TEST(Csv, Errors) {
    std::istringstream empty("");
    EXPECT_THROW(read_csv(empty), std::invalid_argument);
    std::istringstream ragged("x,a\n1,2,3\n");
    EXPECT_THROW(read_csv(ragged), std::invalid_argument);
    std::istringstream bad("x,a\n1,abc\n");
    EXPECT_THROW(read_csv(bad), std::invalid_argument);
    std::istringstream open("x,\"a\n1,2\n");
    EXPECT_THROW(read_csv(open), std::invalid_argument);
}

TEST(Series, ColumnAccess) {
    auto s = sample();
    EXPECT_EQ(s.at("outage")[0], 0.5);
    EXPECT_EQ(s.find("nope"), nullptr);
    EXPECT_THROW(s.at("nope"), std::out_of_range);
    EXPECT_THROW(s.add("short", {1.0}), std::invalid_argument);
    s.columns[0].values.pop_back();
    EXPECT_THROW(s.validate(), std::invalid_argument);
    EXPECT_THROW(to_csv_string(s), std::invalid_argument);
}

TEST(Numbers, FormatParse) {
    for (double v : {0.1, -2.5e-17, 1.0 / 7.0, 123456789.0, 0.0})
        EXPECT_EQ(parse_number(format_number(v)), v);
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_THROW(parse_number("1.0x"), std::invalid_argument);
    EXPECT_THROW(parse_number(""), std::invalid_argument);
}
