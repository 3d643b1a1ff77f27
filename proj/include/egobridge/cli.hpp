#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "egobridge/ensemble.hpp"
#include "egobridge/json_io.hpp"
#include "egobridge/retarget.hpp"

namespace egobridge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// $EGOBRIDGE_DATA_DIR when set, otherwise the installed data directory.
std::filesystem::path data_dir();

// `args` excludes the program name. Prints one JSON summary line to `out`;
// usage text, tables and error messages go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// ---------------------------------------------------------------------------
// File formats used only by the command line.

// "erd-1" JSONL: header {"schema"} then {"t", "left":[6], "right":[6]}.
struct CommandFrame {
  double t = 0.0;
  BimanualCommand q;
};
std::vector<CommandFrame> read_commands(const std::filesystem::path& path);
void write_commands(const std::filesystem::path& path, const std::vector<CommandFrame>& frames);

// "ech-1" JSONL: header {"schema","hz"} then {"tick","chunk":[1440]} with
// optional "episode" and "anchor".
struct ChunkRecord {
  TimedChunk timed;
  std::string episode;
};
std::vector<ChunkRecord> read_chunks(const std::filesystem::path& path);
void write_chunks(const std::filesystem::path& path, const std::vector<ChunkRecord>& chunks);

}  // namespace egobridge::cli
