#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dras/error.hpp"
#include "dras/io_analysis.hpp"
#include "dras/tensor.hpp"

// Long-format CSV: a header naming each dimension followed by `value`,
// then one row per cell with a label per dimension and the cell value.
// UTF-8, comma separated, '.' decimal point, no locale handling.

namespace dras {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& source,
                                               std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    field += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty() || was_quoted) throw ParseError(source, line_no, "stray quote");
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            if (was_quoted) throw ParseError(source, line_no, "text after closing quote");
            field += c;
        }
    }
    if (quoted) throw ParseError(source, line_no, "unterminated quote");
    fields.push_back(std::move(field));
    return fields;
}

inline std::string quote_csv(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos && !field.empty()) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

inline double parse_number(const std::string& text, const std::string& source, std::size_t line_no) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw ParseError(source, line_no, "cannot parse value '" + text + "'");
    return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError(path.string(), 0, "cannot open file for writing");
    return out;
}

}  // namespace detail

/// 17 significant digits, enough to round-trip every double.
inline std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

/// Parses a long-format tensor. Without `expected`, labels are numbered in
/// order of first appearance. With it, the header must name the expected
/// dimensions in order and every label must be one of theirs; the result
/// uses the expected label order.
template <class Policy = NonNegative>
BasicTensor<Policy> parse_tensor(std::istream& in, const std::string& source,
                                 const std::vector<Dim>* expected = nullptr) {
    std::string line;
    std::size_t line_no = 1;
    if (!detail::read_line(in, line)) throw ParseError(source, 1, "empty file, expected a header");
    const auto header = detail::split_csv_line(line, source, line_no);
    if (header.empty() || header.back() != "value")
        throw ParseError(source, 1, "header must end with a 'value' column");
    const std::size_t rank = header.size() - 1;

    std::vector<Dim> dims(rank);
    std::vector<std::unordered_map<std::string, std::size_t>> lookup(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        if (expected) {
            if (expected->size() != rank || (*expected)[k].name != header[k])
                throw ParseError(source, 1, "header column " + std::to_string(k + 1) + " is '" +
                                                header[k] + "', expected dimension '" +
                                                (k < expected->size() ? (*expected)[k].name : "") + "'");
            dims[k] = (*expected)[k];
            for (std::size_t j = 0; j < dims[k].labels.size(); ++j) lookup[k].emplace(dims[k].labels[j], j);
        } else {
            dims[k].name = header[k];
        }
    }
    if (expected && expected->size() != rank)
        throw ParseError(source, 1, "file has " + std::to_string(rank) + " dimensions, expected " +
                                        std::to_string(expected->size()));

    struct Row {
        Index index;
        double value;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (detail::read_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line, source, line_no);
        if (fields.size() != rank + 1)
            throw ParseError(source, line_no, "expected " + std::to_string(rank + 1) + " fields, got " +
                                                  std::to_string(fields.size()));
        Row row{Index(rank), 0.0, line_no};
        for (std::size_t k = 0; k < rank; ++k) {
            auto it = lookup[k].find(fields[k]);
            if (it == lookup[k].end()) {
                if (expected)
                    throw ParseError(source, line_no, "unknown label '" + fields[k] + "' for dimension '" +
                                                          dims[k].name + "'");
                it = lookup[k].emplace(fields[k], dims[k].labels.size()).first;
                dims[k].labels.push_back(fields[k]);
            }
            row.index[k] = it->second;
        }
        row.value = detail::parse_number(fields[rank], source, line_no);
        if (!Policy::admits(row.value))
            throw NegativeValue(source + ":" + std::to_string(line_no) + ": value " + fields[rank] +
                                " is not " + Policy::description);
        rows.push_back(std::move(row));
    }

    Shape shape;
    for (auto& dim : dims) {
        dim.size = dim.labels.size();
        if (dim.size == 0) throw MissingCell(source, 0, "dimension '" + dim.name + "' has no labels");
        shape.push_back(dim.size);
    }
    const std::size_t total = detail::product(shape);
    std::vector<double> values(total, 0.0);
    std::vector<std::size_t> seen_at(total, 0);
    for (const auto& row : rows) {
        std::size_t flat = 0;
        for (std::size_t k = 0; k < rank; ++k) flat = flat * shape[k] + row.index[k];
        if (seen_at[flat] != 0)
            throw DuplicateCell(source, row.line,
                                "cell already given on line " + std::to_string(seen_at[flat]));
        seen_at[flat] = row.line;
        values[flat] = row.value;
    }
    for (std::size_t flat = 0; flat < total; ++flat) {
        if (seen_at[flat] != 0) continue;
        std::string cell = "(";
        std::size_t rest = flat;
        std::vector<std::string> parts(rank);
        for (std::size_t k = rank; k-- > 0;) {
            parts[k] = dims[k].labels[rest % shape[k]];
            rest /= shape[k];
        }
        for (std::size_t k = 0; k < rank; ++k) cell += (k ? "," : "") + parts[k];
        throw MissingCell(source, 0, "missing cell " + cell + ")");
    }
    return BasicTensor<Policy>(std::move(dims), std::move(values));
}

template <class Policy = NonNegative>
BasicTensor<Policy> read_tensor(const std::filesystem::path& path,
                                const std::vector<Dim>* expected = nullptr) {
    auto in = detail::open_input(path);
    return parse_tensor<Policy>(in, path.string(), expected);
}

template <class Policy>
void write_tensor(const BasicTensor<Policy>& t, std::ostream& out) {
    for (const auto& dim : t.dims()) out << detail::quote_csv(dim.name) << ',';
    out << "value\n";
    Index index(t.rank(), 0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        for (std::size_t k = 0; k < t.rank(); ++k) out << detail::quote_csv(t.dim(k).labels[index[k]]) << ',';
        out << format_number(t.values()[flat]) << '\n';
        for (std::size_t k = t.rank(); k-- > 0;) {
            if (++index[k] < t.shape()[k]) break;
            index[k] = 0;
        }
    }
}

template <class Policy>
void write_tensor(const BasicTensor<Policy>& t, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_tensor(t, out);
    if (!out) throw ParseError(path.string(), 0, "write failed");
}

/// Wide 2-D CSV: the first header cell is ignored, the remaining header
/// cells are column labels; each row is a row label followed by values.
inline Tensor read_wide_csv(const std::filesystem::path& path, const std::string& row_dim = "row",
                            const std::string& col_dim = "col") {
    auto in = detail::open_input(path);
    const std::string source = path.string();
    std::string line;
    if (!detail::read_line(in, line)) throw ParseError(source, 1, "empty file, expected a header");
    auto header = detail::split_csv_line(line, source, 1);
    if (header.size() < 2) throw ParseError(source, 1, "header needs at least one column label");
    Dim cols{col_dim, header.size() - 1, {header.begin() + 1, header.end()}};
    Dim rows{row_dim, 0, {}};
    std::vector<double> values;
    std::size_t line_no = 1;
    while (detail::read_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line, source, line_no);
        if (fields.size() != header.size())
            throw ParseError(source, line_no, "expected " + std::to_string(header.size()) +
                                                  " fields, got " + std::to_string(fields.size()));
        rows.labels.push_back(fields[0]);
        for (std::size_t k = 1; k < fields.size(); ++k) {
            const double v = detail::parse_number(fields[k], source, line_no);
            if (!NonNegative::admits(v))
                throw NegativeValue(source + ":" + std::to_string(line_no) + ": value " + fields[k] +
                                    " is not " + NonNegative::description);
            values.push_back(v);
        }
    }
    rows.size = rows.labels.size();
    if (rows.size == 0) throw MissingCell(source, 0, "no data rows");
    return Tensor({std::move(rows), std::move(cols)}, std::move(values));
}

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& manifest, const std::string& file) {
    const std::filesystem::path p(file);
    return p.is_absolute() ? p : manifest.parent_path() / p;
}

}  // namespace detail

/// Reads a margin manifest:
///   {"tensor_dims": [...], "margins": [{"file": "...", "dropped_dim": "..."}]}
/// Relative file names resolve against the manifest's directory. With
/// `parent`, margin labels are aligned to the parent tensor's labels.
inline MarginSet read_margins(const std::filesystem::path& manifest_path,
                              const std::vector<Dim>* parent = nullptr) {
    const std::string source = manifest_path.string();
    const nlohmann::json manifest = detail::load_json(manifest_path);
    std::vector<std::string> names;
    std::vector<std::pair<std::string, std::string>> entries;  // dropped dim, file
    try {
        names = manifest.at("tensor_dims").get<std::vector<std::string>>();
        for (const auto& entry : manifest.at("margins"))
            entries.emplace_back(entry.at("dropped_dim").get<std::string>(),
                                 entry.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, 0, std::string("malformed manifest: ") + e.what());
    }
    const std::size_t rank = names.size();
    if (entries.size() != rank)
        throw ParseError(source, 0, "manifest lists " + std::to_string(entries.size()) +
                                        " margins for " + std::to_string(rank) + " dimensions");
    if (parent) {
        if (parent->size() != rank)
            throw ParseError(source, 0, "manifest has " + std::to_string(rank) +
                                            " dimensions, tensor has " + std::to_string(parent->size()));
        for (std::size_t k = 0; k < rank; ++k)
            if ((*parent)[k].name != names[k])
                throw ParseError(source, 0, "manifest dimension '" + names[k] +
                                                "' does not match tensor dimension '" +
                                                (*parent)[k].name + "'");
    }

    std::vector<std::optional<std::filesystem::path>> files(rank);
    for (const auto& [dropped, file] : entries) {
        std::size_t d = rank;
        for (std::size_t k = 0; k < rank; ++k)
            if (names[k] == dropped) d = k;
        if (d == rank) throw ParseError(source, 0, "unknown dropped_dim '" + dropped + "'");
        if (files[d]) throw ParseError(source, 0, "dimension '" + dropped + "' dropped twice");
        files[d] = detail::resolve(manifest_path, file);
    }

    // Parent labels: given, or collected in first-appearance order from the
    // margins that carry each dimension.
    std::vector<Dim> dims;
    if (parent) {
        dims = *parent;
    } else {
        dims.resize(rank);
        for (std::size_t k = 0; k < rank; ++k) dims[k].name = names[k];
        for (std::size_t d = 0; d < rank; ++d) {
            const Tensor raw = read_tensor(*files[d]);
            for (std::size_t k = 0, pos = 0; k < rank; ++k) {
                if (k == d) continue;
                const Dim& seen = raw.dim(pos++);
                if (seen.name != names[k])
                    throw ParseError(files[d]->string(), 1, "column '" + seen.name + "' should be '" +
                                                                names[k] + "'");
                for (const auto& label : seen.labels)
                    if (std::find(dims[k].labels.begin(), dims[k].labels.end(), label) ==
                        dims[k].labels.end())
                        dims[k].labels.push_back(label);
            }
        }
        for (auto& dim : dims) dim.size = dim.labels.size();
        if (rank == 1) throw ParseError(source, 0, "cannot infer labels of a one-dimensional tensor");
    }

    std::vector<Tensor> margins;
    for (std::size_t d = 0; d < rank; ++d) {
        std::vector<Dim> expected;
        for (std::size_t k = 0; k < rank; ++k)
            if (k != d) expected.push_back(dims[k]);
        margins.push_back(read_tensor(*files[d], &expected));
    }
    return MarginSet(std::move(dims), std::move(margins));
}

/// Writes one long-format file per margin plus `<stem>.json`; returns the
/// manifest path.
inline std::filesystem::path write_margins(const MarginSet& margins, const std::filesystem::path& dir,
                                           const std::string& stem = "margins") {
    nlohmann::json manifest;
    manifest["tensor_dims"] = nlohmann::json::array();
    manifest["margins"] = nlohmann::json::array();
    for (const auto& dim : margins.parent_dims()) manifest["tensor_dims"].push_back(dim.name);
    for (std::size_t d = 0; d < margins.rank(); ++d) {
        const std::string dropped = margins.parent_dims()[d].name;
        const std::string file = stem + "_" + std::to_string(d) + "_" + dropped + ".csv";
        write_tensor(margins[d], dir / file);
        manifest["margins"].push_back({{"file", file}, {"dropped_dim", dropped}});
    }
    const auto path = dir / (stem + ".json");
    auto out = detail::open_output(path);
    out << manifest.dump(2) << '\n';
    return path;
}

struct IOTablePaths {
    std::filesystem::path flows;
    std::optional<std::filesystem::path> u1;  // derived from flows when absent
    std::optional<std::filesystem::path> u2;
    std::filesystem::path p;
    std::filesystem::path v1;
    std::filesystem::path v2;
};

/// Reads a 1-D long-format vector whose labels must match `dim`.
inline std::vector<double> read_vector(const std::filesystem::path& path, const Dim& dim) {
    Dim expected = dim;
    auto in = detail::open_input(path);
    // The vector may name its axis differently from the matrix; rename to match.
    std::string line;
    if (!detail::read_line(in, line)) throw ParseError(path.string(), 1, "empty file, expected a header");
    const auto header = detail::split_csv_line(line, path.string(), 1);
    if (header.size() != 2 || header.back() != "value")
        throw ParseError(path.string(), 1, "vector file needs a header '<dim>,value'");
    expected.name = header[0];
    std::stringstream rest;
    rest << line << '\n' << in.rdbuf();
    const std::vector<Dim> dims{expected};
    const Tensor t = parse_tensor(rest, path.string(), &dims);
    return {t.values().begin(), t.values().end()};
}

/// Reads flows and border vectors and validates the accounting
/// identities. Row and column labels of the flows must coincide.
inline IOTable read_io_table(const IOTablePaths& paths) {
    Tensor flows = read_tensor(paths.flows);
    if (flows.rank() != 2) throw ParseError(paths.flows.string(), 0, "flows must be two-dimensional");
    if (flows.dim(0).labels != flows.dim(1).labels) {
        // Align column order to row order when both carry the same industries.
        std::vector<Dim> aligned = flows.dims();
        aligned[1].labels = aligned[0].labels;
        aligned[1].size = aligned[0].size;
        flows = read_tensor(paths.flows, &aligned);
    }
    const Dim& industries = flows.dim(0);
    auto p = read_vector(paths.p, industries);
    auto v1 = read_vector(paths.v1, industries);
    auto v2 = read_vector(paths.v2, industries);
    if (paths.u1 && paths.u2)
        return IOTable(std::move(flows), read_vector(*paths.u1, industries),
                       read_vector(*paths.u2, industries), std::move(p), std::move(v1), std::move(v2));
    if (paths.u1 || paths.u2)
        throw ParseError(paths.flows.string(), 0, "give both u1 and u2 or neither");
    return IOTable::from_flows(std::move(flows), std::move(p), std::move(v1), std::move(v2));
}

/// {"flows": "...", "u1": "...", "u2": "...", "p": "...", "v1": "...", "v2": "..."}
/// with u1/u2 optional; paths relative to the manifest.
inline IOTablePaths read_io_manifest(const std::filesystem::path& manifest_path) {
    const nlohmann::json manifest = detail::load_json(manifest_path);
    auto field = [&](const char* key) { return detail::resolve(manifest_path, manifest.at(key).get<std::string>()); };
    try {
        IOTablePaths paths{field("flows"), std::nullopt, std::nullopt, field("p"), field("v1"), field("v2")};
        if (manifest.contains("u1")) paths.u1 = field("u1");
        if (manifest.contains("u2")) paths.u2 = field("u2");
        return paths;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string(), 0, std::string("malformed IO table manifest: ") + e.what());
    }
}

}  // namespace dras
