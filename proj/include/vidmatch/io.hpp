#pragma once

#include "vidmatch/grid.hpp"
#include "vidmatch/matching.hpp"
#include "vidmatch/sequence.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vidmatch {

namespace sim {
struct SimInstance;
}

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed `key = value` input or unknown keys.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace io {

namespace fs = std::filesystem;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

// Descriptor files: "#dim=D" then one "id,v1,...,vD" line per frame.
void write_descriptors(const fs::path& path, const FrameSequence<double>& seq);
FrameSequence<double> read_descriptors(const fs::path& path, SequenceKind kind);

// Distance matrices: binary "SMDM" + u32 n + u32 m + n*m little-endian float32
// row-major, or plain CSV (one row per foreground frame).
void write_matrix_binary(const fs::path& path, const Matrix<double>& m);
Matrix<double> read_matrix_binary(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Matrix<double>& m);
Matrix<double> read_matrix_csv(const fs::path& path);
/// Dispatches on the magic bytes.
Matrix<double> read_matrix(const fs::path& path);

// Binary PGM (P5), 8-bit.
void write_pgm(const fs::path& path, const Mask& mask);
void write_pgm(const fs::path& path, const Channel<double>& gray);  // values clamped to [0,1]
Mask read_pgm_mask(const fs::path& path);  // pixel > 127 is foreground
Channel<double> read_pgm(const fs::path& path);

// Assignment CSV: fg_id,bg_id,distance,provenance.
void write_assignment_csv(const fs::path& path, const MatchAssignment& a,
                          const std::string& comment = {});
MatchAssignment read_assignment_csv(const fs::path& path);

// Plain-text key = value files with '#' comments. Duplicate keys are errors.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text, const std::string& source);
KeyValues read_key_values(const fs::path& path);
void write_key_values(const fs::path& path, const KeyValues& kv);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Instance bundle directory: fg.txt, bg.txt, truth_strong.csv,
// masks/fg_NNNN.pgm, params.cfg.
void write_bundle(const fs::path& dir, const sim::SimInstance& instance);
sim::SimInstance read_bundle(const fs::path& dir);

}  // namespace io
}  // namespace vidmatch
