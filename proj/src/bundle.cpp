#include "lgt/bundle.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "json.hpp"

#include "lgt/error.hpp"
#include "lgt/graph.hpp"

namespace lgt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string where(const fs::path& file, std::size_t line) {
    return file.filename().string() + ":" + std::to_string(line);
}

std::ifstream open_input(const fs::path& file) {
    if (!fs::exists(file)) throw DataError("missing bundle file " + file.string());
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    return in;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename Number>
bool parse_number(std::string_view s, Number& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

json read_json(const fs::path& file) {
    auto in = open_input(file);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(file.filename().string() + ": malformed JSON: " + e.what());
    }
}

IndexSet read_index_array(const json& doc, const char* key, const fs::path& file) {
    if (!doc.contains(key) || !doc[key].is_array())
        throw DataError(file.filename().string() + ": missing array '" + key + "'");
    IndexSet out;
    for (const auto& v : doc[key]) {
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw DataError(file.filename().string() + ": '" + key + "' must hold nonnegative integers");
        out.push_back(v.get<std::uint32_t>());
    }
    return out;
}

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    out << text;
    if (!out) throw DataError("write failed for " + file.string());
}

}  // namespace

GraphDataset load_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("bundle directory not found: " + dir.string());

    const auto meta_path = dir / "meta.json";
    const json meta = read_json(meta_path);
    for (const char* key : {"n", "f", "c"})
        if (!meta.contains(key) || !meta[key].is_number_integer() || meta[key].get<long long>() < 0)
            throw DataError("meta.json: missing or invalid integer '" + std::string(key) + "'");
    const auto n = meta["n"].get<std::size_t>();
    const auto f = meta["f"].get<std::size_t>();
    GraphDataset d;
    d.num_classes = meta["c"].get<std::size_t>();
    d.name = meta.value("name", dir.filename().string());

    {
        const auto path = dir / "features.csv";
        auto in = open_input(path);
        d.features = MatrixD(n, f);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            if (row >= n) throw DataError(where(path, row + 1) + ": more than n = " + std::to_string(n) + " rows");
            std::string_view rest(line);
            std::size_t col = 0;
            while (true) {
                const auto comma = rest.find(',');
                const auto cell = rest.substr(0, comma);
                if (col >= f) throw DataError(where(path, row + 1) + ": more than f = " + std::to_string(f) + " values");
                double v = 0.0;
                if (!parse_number(cell, v))
                    throw DataError(where(path, row + 1) + ": malformed real '" + std::string(trim(cell)) + "'");
                d.features(row, col++) = v;
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
            if (col != f)
                throw DataError(where(path, row + 1) + ": expected " + std::to_string(f) + " values, found " +
                                std::to_string(col));
            ++row;
        }
        if (row != n) throw DataError("features.csv: expected " + std::to_string(n) + " rows, found " + std::to_string(row));
    }

    {
        const auto path = dir / "labels.txt";
        auto in = open_input(path);
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            int y = 0;
            if (!parse_number(std::string_view(line), y))
                throw DataError(where(path, row + 1) + ": malformed label '" + std::string(trim(line)) + "'");
            if (y < 0 || static_cast<std::size_t>(y) >= d.num_classes)
                throw DataError(where(path, row + 1) + ": label " + std::to_string(y) + " outside [0, " +
                                std::to_string(d.num_classes) + ")");
            d.labels.push_back(y);
            ++row;
        }
        if (row != n) throw DataError("labels.txt: expected " + std::to_string(n) + " labels, found " + std::to_string(row));
    }

    {
        const auto path = dir / "edges.tsv";
        auto in = open_input(path);
        std::vector<Edge> edges;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            const auto tab = line.find('\t');
            std::size_t i = 0, j = 0;
            if (tab == std::string::npos || !parse_number(std::string_view(line).substr(0, tab), i) ||
                !parse_number(std::string_view(line).substr(tab + 1), j))
                throw DataError(where(path, lineno) + ": expected 'i<TAB>j', got '" + line + "'");
            if (i >= n || j >= n) throw DataError(where(path, lineno) + ": node index out of range for n = " + std::to_string(n));
            edges.emplace_back(i, j);
        }
        d.adjacency = build_adjacency(edges, n);
    }

    {
        const auto path = dir / "splits.json";
        const json doc = read_json(path);
        d.splits.train = read_index_array(doc, "train", path);
        d.splits.val = read_index_array(doc, "val", path);
        d.splits.test = read_index_array(doc, "test", path);
    }

    d.validate();
    return d;
}

void save_bundle(const GraphDataset& d, const fs::path& dir) {
    d.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    json meta = {{"n", d.num_nodes()}, {"f", d.num_features()}, {"c", d.num_classes}, {"name", d.name}};
    write_text(dir / "meta.json", meta.dump() + "\n");

    std::string edges;
    for (const auto& [i, j] : edge_list(d.adjacency)) edges += std::to_string(i) + "\t" + std::to_string(j) + "\n";
    write_text(dir / "edges.tsv", edges);

    std::string features;
    for (std::size_t r = 0; r < d.features.rows(); ++r) {
        for (std::size_t c = 0; c < d.features.cols(); ++c) {
            if (c) features += ',';
            features += format_real(d.features(r, c));
        }
        features += '\n';
    }
    write_text(dir / "features.csv", features);

    std::string labels;
    for (int y : d.labels) labels += std::to_string(y) + "\n";
    write_text(dir / "labels.txt", labels);

    json splits = {{"train", d.splits.train}, {"val", d.splits.val}, {"test", d.splits.test}};
    write_text(dir / "splits.json", splits.dump() + "\n");
}

GraphDataset convert_linqs(const fs::path& content, const fs::path& cites, const std::string& name, std::uint64_t seed,
                           std::size_t per_class, std::size_t val_size, std::size_t test_size) {
    auto in = open_input(content);
    std::unordered_map<std::string, std::size_t> node_of;
    std::map<std::string, int> class_of;
    std::vector<std::string> label_names;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t f = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream tok(line);
        std::vector<std::string> cells;
        for (std::string c; tok >> c;) cells.push_back(c);
        if (cells.size() < 3) throw DataError(where(content, lineno) + ": expected id, features, label");
        if (f == 0) f = cells.size() - 2;
        if (cells.size() - 2 != f) throw DataError(where(content, lineno) + ": inconsistent feature count");
        std::vector<double> row(f);
        for (std::size_t k = 0; k < f; ++k)
            if (!parse_number(std::string_view(cells[k + 1]), row[k]))
                throw DataError(where(content, lineno) + ": malformed feature '" + cells[k + 1] + "'");
        if (!node_of.emplace(cells.front(), rows.size()).second)
            throw DataError(where(content, lineno) + ": duplicate node id " + cells.front());
        rows.push_back(std::move(row));
        label_names.push_back(cells.back());
    }
    GraphDataset d;
    d.name = name;
    const std::size_t n = rows.size();
    d.features = MatrixD(n, f);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < f; ++k) d.features(i, k) = rows[i][k];
    for (const auto& lbl : label_names) {
        const auto [it, fresh] = class_of.emplace(lbl, static_cast<int>(class_of.size()));
        d.labels.push_back(it->second);
    }
    d.num_classes = class_of.size();

    auto cin = open_input(cites);
    std::vector<Edge> edges;
    lineno = 0;
    while (std::getline(cin, line)) {
        ++lineno;
        std::istringstream tok(line);
        std::string a, b;
        if (!(tok >> a >> b)) continue;
        const auto ia = node_of.find(a), ib = node_of.find(b);
        // Dumps of this format cite a handful of papers absent from the content file.
        if (ia == node_of.end() || ib == node_of.end()) continue;
        edges.emplace_back(ia->second, ib->second);
    }
    d.adjacency = build_adjacency(edges, n);
    d.splits = split_per_class(d.labels, d.num_classes, per_class, val_size, test_size, seed);
    d.validate();
    return d;
}

}  // namespace lgt
