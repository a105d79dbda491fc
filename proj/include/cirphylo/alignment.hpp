#pragma once

#include <cctype>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace cirphylo {

// Character alphabet: `symbols[k]` encodes state k; characters in `unknown` are
// gaps/ambiguities (state -1).  Matching is case-insensitive.
struct Alphabet {
  std::string symbols;
  std::string unknown;

  static Alphabet dna() { return {"ACGT", "-?NX."}; }

  int size() const noexcept { return static_cast<int>(symbols.size()); }

  // State index, -1 for unknown, -2 for a character not in the alphabet.
  int encode(char c) const noexcept {
    const auto upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto k = symbols.find(upper); k != std::string::npos) return static_cast<int>(k);
    if (upper == 'U') {
      if (auto k = symbols.find('T'); k != std::string::npos) return static_cast<int>(k);
    }
    if (unknown.find(c) != std::string::npos || unknown.find(upper) != std::string::npos) return -1;
    return -2;
  }

  char decode(int state) const { return state < 0 ? '-' : symbols.at(static_cast<std::size_t>(state)); }
};

struct Alignment {
  std::vector<std::string> names;
  std::vector<std::string> sequences;

  std::size_t taxon_count() const noexcept { return names.size(); }
  std::size_t site_count() const noexcept { return sequences.empty() ? 0 : sequences.front().size(); }

  // Row t, column s as a state index (-1 for unknown).
  std::vector<std::vector<int>> encode(const Alphabet& alphabet) const {
    std::vector<std::vector<int>> out(names.size());
    for (std::size_t t = 0; t < names.size(); ++t) {
      out[t].reserve(sequences[t].size());
      for (char c : sequences[t]) out[t].push_back(alphabet.encode(c));
    }
    return out;
  }
};

enum class Alignment_format { fasta, phylip };

/// Checks equal lengths, unique names, and characters against `alphabet`.
/// Errors name the taxon (1-based) and column (1-based).
inline void validate_alignment(const Alignment& aln, const Alphabet& alphabet) {
  if (aln.names.size() != aln.sequences.size()) throw Validation_error{"alignment: names and sequences differ in count"};
  if (aln.names.empty()) throw Validation_error{"alignment: no sequences"};
  const auto length = aln.sequences.front().size();
  if (length == 0) throw Validation_error{"alignment: no sites"};
  for (std::size_t t = 0; t < aln.names.size(); ++t) {
    for (std::size_t u = 0; u < t; ++u) {
      if (aln.names[u] == aln.names[t]) throw Validation_error{"alignment: duplicate taxon name '" + aln.names[t] + "'"};
    }
    if (aln.sequences[t].size() != length) {
      throw Validation_error{"alignment: taxon " + std::to_string(t + 1) + " ('" + aln.names[t] + "') has " +
                             std::to_string(aln.sequences[t].size()) + " sites, expected " + std::to_string(length)};
    }
    for (std::size_t s = 0; s < length; ++s) {
      if (alphabet.encode(aln.sequences[t][s]) == -2) {
        throw Validation_error{"alignment: taxon " + std::to_string(t + 1) + " ('" + aln.names[t] +
                               "') has unknown character '" + std::string(1, aln.sequences[t][s]) + "' at column " +
                               std::to_string(s + 1)};
      }
    }
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

inline void append_residues(std::string& seq, std::string_view line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) seq.push_back(c);
  }
}

inline Alignment parse_fasta(std::string_view text) {
  Alignment aln;
  bool seen_header = false;
  for (auto raw : split_lines(text)) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == ';') continue;
    if (line.front() == '>') {
      auto name = trim(line.substr(1));
      if (auto space = name.find_first_of(" \t"); space != std::string_view::npos) name = name.substr(0, space);
      if (name.empty()) throw Validation_error{"fasta: empty sequence name"};
      aln.names.emplace_back(name);
      aln.sequences.emplace_back();
      seen_header = true;
      continue;
    }
    if (!seen_header) throw Validation_error{"fasta: sequence data before the first '>' header"};
    append_residues(aln.sequences.back(), line);
  }
  return aln;
}

// Sequential PHYLIP: "ntax nchar" header, then each taxon's name followed by its
// sequence, which may continue over several lines.
inline Alignment parse_phylip(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Validation_error{"phylip: empty input"};

  std::istringstream header{std::string{trim(lines[i++])}};
  long ntax = -1, nchar = -1;
  if (!(header >> ntax >> nchar) || ntax <= 0 || nchar < 0) {
    throw Validation_error{"phylip: header must be '<taxa> <sites>'"};
  }

  Alignment aln;
  while (i < lines.size()) {
    const auto line = trim(lines[i++]);
    if (line.empty()) continue;
    if (static_cast<long>(aln.names.size()) == ntax) {
      throw Validation_error{"phylip: header declares " + std::to_string(ntax) + " taxa but more sequences follow"};
    }
    const auto split = line.find_first_of(" \t");
    if (split == std::string_view::npos) {
      throw Validation_error{"phylip: taxon " + std::to_string(aln.names.size() + 1) + " has no sequence"};
    }
    aln.names.emplace_back(line.substr(0, split));
    aln.sequences.emplace_back();
    auto& seq = aln.sequences.back();
    append_residues(seq, line.substr(split));
    while (static_cast<long>(seq.size()) < nchar && i < lines.size()) {
      const auto more = trim(lines[i]);
      if (more.empty()) {
        ++i;
        continue;
      }
      append_residues(seq, more);
      ++i;
    }
    if (static_cast<long>(seq.size()) != nchar) {
      throw Validation_error{"phylip: taxon " + std::to_string(aln.names.size()) + " ('" + aln.names.back() + "') has " +
                             std::to_string(seq.size()) + " sites, header declares " + std::to_string(nchar)};
    }
  }
  if (static_cast<long>(aln.names.size()) != ntax) {
    throw Validation_error{"phylip: header declares " + std::to_string(ntax) + " taxa, found " +
                           std::to_string(aln.names.size())};
  }
  return aln;
}

}  // namespace detail

inline Alignment read_alignment(std::string_view text, Alignment_format format,
                                const Alphabet& alphabet = Alphabet::dna()) {
  auto aln = format == Alignment_format::fasta ? detail::parse_fasta(text) : detail::parse_phylip(text);
  validate_alignment(aln, alphabet);
  return aln;
}

inline std::string write_fasta(const Alignment& aln, std::size_t width = 60) {
  std::string out;
  for (std::size_t t = 0; t < aln.names.size(); ++t) {
    out += '>';
    out += aln.names[t];
    out += '\n';
    const auto& seq = aln.sequences[t];
    for (std::size_t s = 0; s < seq.size(); s += width) {
      out.append(seq, s, width);
      out += '\n';
    }
    if (seq.empty()) out += '\n';
  }
  return out;
}

}  // namespace cirphylo
