#include "forchestra/data/m5.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include "forchestra/error.hpp"

namespace forchestra::data {
namespace {

std::vector<std::string_view> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

bool is_day_column(std::string_view name) {
    if (name.size() < 3 || name.substr(0, 2) != "d_") return false;
    for (char c : name.substr(2)) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

struct Table {
    std::vector<std::string> header;
    std::size_t id_column = 0;
    std::vector<std::size_t> day_columns;
    std::vector<std::size_t> meta_columns;
    std::vector<std::vector<std::string>> rows;  // row index 0 is file line 2
};

Table read_table(const std::filesystem::path& path, std::size_t max_rows) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    Table table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file, expected a header row");
    bool has_id = false;
    for (auto cell : split_line(line)) table.header.emplace_back(cell);
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& name = table.header[c];
        if (name == "id") {
            table.id_column = c;
            has_id = true;
        } else if (is_day_column(name)) {
            table.day_columns.push_back(c);
        } else {
            table.meta_columns.push_back(c);
        }
    }
    if (!has_id) throw ParseError(path.string() + ": header has no 'id' column");
    if (table.day_columns.empty()) throw ParseError(path.string() + ": header has no d_<n> day columns");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (max_rows != 0 && table.rows.size() == max_rows) break;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw ParseError(path.string() + ": row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(table.header.size()));
        }
        table.rows.emplace_back(cells.begin(), cells.end());
        table.rows.back().push_back(std::to_string(line_no));  // trailing cell: source line number
    }
    return table;
}

long parse_count(const std::string& cell, const std::filesystem::path& path, const std::string& line_no,
                 const std::string& column) {
    long value = 0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value < 0) {
        throw ParseError(path.string() + ": row " + line_no + ", column " + column +
                         ": expected a nonnegative integer, got '" + cell + "'");
    }
    return value;
}

}  // namespace

Dataset load_m5_csv(const std::filesystem::path& path, const M5Options& options) {
    Table sales = read_table(path, options.max_rows);
    const std::size_t T_full = sales.day_columns.size();
    const std::size_t T = options.max_days == 0 ? T_full : std::min(options.max_days, T_full);
    const std::size_t first_day = T_full - T;

    std::optional<Table> avail;
    if (options.availability_path) {
        avail = read_table(*options.availability_path, options.max_rows);
        if (avail->day_columns.size() != T_full || avail->rows.size() != sales.rows.size()) {
            throw ParseError(options.availability_path->string() + ": shape differs from '" + path.string() + "'");
        }
    }

    std::vector<SeriesInstance> instances;
    instances.reserve(sales.rows.size());
    for (std::size_t r = 0; r < sales.rows.size(); ++r) {
        const auto& row = sales.rows[r];
        const std::string& line_no = row.back();
        SeriesInstance s;
        s.id = row[sales.id_column];
        for (std::size_t c : sales.meta_columns) s.metadata.emplace_back(sales.header[c], row[c]);
        s.sales.reserve(T);
        for (std::size_t d = first_day; d < T_full; ++d) {
            const std::size_t c = sales.day_columns[d];
            s.sales.push_back(static_cast<double>(parse_count(row[c], path, line_no, sales.header[c])));
        }
        s.availability.assign(T, kSale);
        if (avail) {
            const auto& arow = avail->rows[r];
            if (arow[avail->id_column] != s.id) {
                throw ParseError(options.availability_path->string() + ": row " + arow.back() + " has id '" +
                                 arow[avail->id_column] + "', expected '" + s.id + "'");
            }
            for (std::size_t d = first_day; d < T_full; ++d) {
                const std::size_t c = avail->day_columns[d];
                const long flag = parse_count(arow[c], *options.availability_path, arow.back(), avail->header[c]);
                if (flag > 1) {
                    throw ParseError(options.availability_path->string() + ": row " + arow.back() +
                                     ": availability must be 0 or 1");
                }
                s.availability[d - first_day] = static_cast<std::uint8_t>(flag);
            }
        }
        instances.push_back(std::move(s));
    }
    return make_dataset(std::move(instances), options.shape);
}

namespace {

void write_wide(const Dataset& ds, const std::filesystem::path& path, bool availability) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "id";
    std::vector<std::string> meta_keys;
    if (!ds.instances.empty()) {
        for (const auto& kv : ds.instances.front().metadata) meta_keys.push_back(kv.first);
    }
    for (const auto& k : meta_keys) out << ',' << k;
    for (std::size_t d = 1; d <= ds.length(); ++d) out << ",d_" << d;
    out << '\n';
    for (const auto& s : ds.instances) {
        out << s.id;
        for (const auto& k : meta_keys) out << ',' << s.meta(k).value_or("");
        for (std::size_t t = 0; t < s.length(); ++t) {
            if (availability) {
                out << ',' << static_cast<int>(s.availability[t]);
            } else {
                out << ',' << static_cast<long long>(s.sales[t]);
            }
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_m5_csv(const Dataset& dataset, const std::filesystem::path& sales_path,
                  const std::optional<std::filesystem::path>& availability_path) {
    write_wide(dataset, sales_path, false);
    if (availability_path) write_wide(dataset, *availability_path, true);
}

}  // namespace forchestra::data
