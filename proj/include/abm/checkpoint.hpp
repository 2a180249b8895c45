#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "abm/model.hpp"

namespace abm {

// Layout: "ABM1", version byte, u32 config length + config text (key=value),
// scalar width byte (4 or 8), u32 parameter count, then per parameter
// u32 name length, name, u32 rank, u32 dims..., little-endian values.
inline constexpr std::uint8_t kCheckpointVersion = 1;

template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(const AbmModel<T>& model);

/// Parses a checkpoint and builds a model from its embedded config.
/// Throws ParseError naming the failing field; never returns a partial model.
template <typename T>
std::unique_ptr<AbmModel<T>> model_from_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Loads values into an existing model. Throws ShapeError when the checkpoint
/// was written for a different AbmConfig.
template <typename T>
void load_checkpoint_into(AbmModel<T>& model, const std::vector<std::uint8_t>& bytes);

AbmConfig checkpoint_config(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const AbmModel<T>& model, const std::filesystem::path& path);
template <typename T>
std::unique_ptr<AbmModel<T>> load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// 16 hex digits of FNV-1a over the checkpoint bytes.
std::string model_id(const std::vector<std::uint8_t>& bytes);

/// Human-readable config plus one "name shape" line per parameter.
template <typename T>
std::string model_card(const AbmModel<T>& model);

}  // namespace abm
