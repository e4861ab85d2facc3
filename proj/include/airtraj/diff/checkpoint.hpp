#pragma once

#include <map>
#include <string>
#include <vector>

#include "airtraj/diff/array.hpp"

namespace airtraj::diff {

// Named parameter set plus free-form metadata, persisted as a versioned flat
// binary with a shape table. Round-trips are bit-exact.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::string> names;
    std::vector<Array> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace airtraj::diff
