/*
   Copyright 2026 The rapidset Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>

namespace rapidset::io {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x)
{
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

class write_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Opens `path` for writing, creating parent directories. Throws write_error.
inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw write_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw write_error("cannot open " + path.string() + " for writing");
    return out;
}

// Minimal CSV row builder; fields never contain separators.
class CsvRow {
public:
    CsvRow& operator<<(double x) { return add(format_double(x)); }
    CsvRow& operator<<(std::uint64_t x) { return add(std::to_string(x)); }
    CsvRow& operator<<(std::int64_t x) { return add(std::to_string(x)); }
    CsvRow& operator<<(unsigned x) { return add(std::to_string(x)); }
    CsvRow& operator<<(int x) { return add(std::to_string(x)); }
    CsvRow& operator<<(std::string_view s) { return add(std::string(s)); }

    const std::string& str() const noexcept { return line_; }

private:
    CsvRow& add(const std::string& field)
    {
        if (!first_) line_ += ',';
        line_ += field;
        first_ = false;
        return *this;
    }

    std::string line_;
    bool first_ = true;
};

inline std::ostream& operator<<(std::ostream& os, const CsvRow& row) { return os << row.str() << '\n'; }

} // namespace rapidset::io
