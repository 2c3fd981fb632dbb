#pragma once

#include "agcam/adapter/attention_trace.hpp"

#include <filesystem>
#include <iosfwd>

namespace agcam {

// Little-endian binary serialization of an AttentionTrace ("AGTR", version 1).
// Doubles are stored as their IEEE-754 bit patterns, so a round trip is exact.
void write_trace(std::ostream &out, const AttentionTrace &trace);
AttentionTrace read_trace(std::istream &in);

void save_trace(const std::filesystem::path &path, const AttentionTrace &trace);
AttentionTrace load_trace(const std::filesystem::path &path);

} // namespace agcam
