#pragma once
// Versioned JSON persistence for memory banks. Saves are canonical (sorted
// keys, stable number formatting) and atomic (temp file + rename), so equal
// banks produce byte-identical files and a crash never corrupts the target.

#include <string>

#include <json.hpp>

#include "bimem/memory.hpp"

namespace bimem {

inline constexpr int kBankFormatVersion = 1;

nlohmann::json bank_to_json(const MemoryBank& bank);
MemoryBank bank_from_json(const nlohmann::json& doc, const std::string& origin);

// Refuses to write a bank that fails validation.
void save_bank(const MemoryBank& bank, const std::string& path);

// Parse + version check + validation; errors carry the offending JSON path.
MemoryBank load_bank(const std::string& path);

// True when the file at `path` looks like a bank file rather than a
// conversation/QA dataset (used by surfaces that accept either).
bool looks_like_bank_file(const std::string& path);

}  // namespace bimem
