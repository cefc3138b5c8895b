#pragma once

#include <compare>
#include <cstdio>
#include <optional>
#include <string>

namespace fedcast {

// A calendar month (year + month index 1..12). The atomic time unit of the
// whole pipeline; there is no sub-monthly resolution anywhere.
struct YearMonth {
    int year = 0;
    int month = 1; // 1..12

    bool valid() const { return month >= 1 && month <= 12; }

    // Months since year 0, used for arithmetic and ordering.
    int index() const { return year * 12 + (month - 1); }

    static YearMonth from_index(int idx) {
        int y = idx / 12;
        int m = idx % 12;
        if (m < 0) {
            m += 12;
            y -= 1;
        }
        return YearMonth{y, m + 1};
    }

    YearMonth plus_months(int n) const { return from_index(index() + n); }

    // Whole months from other to *this (positive when *this is later).
    int months_since(const YearMonth& other) const { return index() - other.index(); }

    friend auto operator<=>(const YearMonth& a, const YearMonth& b) {
        return a.index() <=> b.index();
    }
    friend bool operator==(const YearMonth& a, const YearMonth& b) {
        return a.index() == b.index();
    }

    // "YYYY-MM"
    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
        return std::string(buf);
    }

    // Parses "YYYY-MM"; rejects anything else.
    static std::optional<YearMonth> parse(const std::string& text) {
        if (text.size() != 7 || text[4] != '-') return std::nullopt;
        for (int i : {0, 1, 2, 3, 5, 6}) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
        }
        int y = std::stoi(text.substr(0, 4));
        int m = std::stoi(text.substr(5, 2));
        YearMonth ym{y, m};
        if (!ym.valid()) return std::nullopt;
        return ym;
    }
};

} // namespace fedcast
