#pragma once

#include <filesystem>

#include "lgt/dataset.hpp"

namespace lgt {

/// Reads a graph bundle directory:
///   meta.json     {"n":int,"f":int,"c":int,"name":string}
///   edges.tsv     "i<TAB>j" per line, 0-indexed, either orientation
///   features.csv  n lines of f comma-separated reals
///   labels.txt    n lines, one integer each
///   splits.json   {"train":[...],"val":[...],"test":[...]}
/// Errors carry the file name and, where relevant, the 1-based line number.
GraphDataset load_bundle(const std::filesystem::path& dir);

/// Writes the five bundle files. Output bytes depend only on the dataset.
void save_bundle(const GraphDataset& data, const std::filesystem::path& dir);

/// Converts a LINQS-style citation dump (`<id> <f binary features> <label>`
/// per line in the content file, `<cited> <citing>` per line in the cites
/// file) into a dataset. Labels are numbered in order of first appearance;
/// splits are drawn with split_per_class(per_class, val_size, test_size, seed).
GraphDataset convert_linqs(const std::filesystem::path& content, const std::filesystem::path& cites,
                           const std::string& name, std::uint64_t seed, std::size_t per_class = 20,
                           std::size_t val_size = 1000, std::size_t test_size = 1000);

}  // namespace lgt
