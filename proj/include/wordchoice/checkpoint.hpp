#pragma once

// Checkpoint container:
//
//   "BLWC"                      4 magic bytes
//   u16 version                 little-endian, currently 1
//   u32 header length           little-endian byte count of the JSON header
//   header                      UTF-8 JSON: kind, hyperparams, tensors
//                               [{name, rows, cols}...] in payload order,
//                               vocabulary (full word list, id order)
//   payload                     each tensor as little-endian float32,
//                               row-major, in manifest order
//
// Values are stored at 32-bit precision; loading widens them back to
// 64-bit.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wordchoice/baselines/rnnlm.hpp"
#include "wordchoice/bilstm.hpp"
#include "wordchoice/corpus.hpp"
#include "wordchoice/error.hpp"
#include "wordchoice/hyperparams.hpp"
#include "wordchoice/numkernel.hpp"
#include "wordchoice/training.hpp"

namespace wordchoice::checkpoint {

inline constexpr std::array<char, 4> kMagic = {'B', 'L', 'W', 'C'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::string_view kKindBiLstm = "bilstm";
inline constexpr std::string_view kKindRnnLm = "rnnlm";

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xFF));
  }
}

template <class T>
bool get_le(std::istream& in, T& v) {
  std::uint64_t acc = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    int ch = in.get();
    if (ch == std::char_traits<char>::eof()) return false;
    acc |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * b);
  }
  v = static_cast<T>(acc);
  return true;
}

}  // namespace detail

struct Container {
  nlohmann::json header;
  std::vector<std::pair<std::string, nk::Matrix>> tensors;
};

inline void write_container(std::ostream& out, nlohmann::json header,
                            const std::vector<nk::ConstTensorRef>& tensors) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& t : tensors) {
    manifest.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
  }
  header["tensors"] = std::move(manifest);
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  detail::put_le<std::uint16_t>(out, kVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors) {
    for (double v : t.value->values()) {
      detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!out) throw IoError("failed writing checkpoint");
}

inline Container read_container(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  std::uint16_t version = 0;
  std::uint32_t header_len = 0;
  if (!detail::get_le(in, version)) throw TruncatedError("checkpoint truncated in version field");
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  if (!detail::get_le(in, header_len)) throw TruncatedError("checkpoint truncated in header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw TruncatedError("checkpoint truncated in header");

  Container c;
  try {
    c.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (!c.header.is_object() || !c.header.contains("tensors") || !c.header["tensors"].is_array()) {
    throw FormatError("corrupt checkpoint header: missing tensor manifest");
  }
  try {
    for (const auto& entry : c.header["tensors"]) {
      const auto rows = entry.at("rows").get<std::size_t>();
      const auto cols = entry.at("cols").get<std::size_t>();
      c.tensors.emplace_back(entry.at("name").get<std::string>(), nk::Matrix(rows, cols));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  for (auto& [name, m] : c.tensors) {
    for (double& v : m.values()) {
      std::uint32_t bits = 0;
      if (!detail::get_le(in, bits)) throw TruncatedError("checkpoint payload truncated in tensor " + name);
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after checkpoint payload");
  }
  return c;
}

namespace detail {

inline nlohmann::json base_header(std::string_view kind, const Hyperparams& hyper,
                                  const corpus::Vocabulary& vocab) {
  nlohmann::json words = nlohmann::json::array();
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    words.push_back(vocab.word_of(static_cast<corpus::WordId>(id)));
  }
  return {{"kind", kind}, {"hyperparams", hyper}, {"vocabulary", std::move(words)}};
}

inline std::pair<Hyperparams, corpus::Vocabulary> parse_base(const nlohmann::json& header,
                                                             std::string_view kind) {
  try {
    if (header.at("kind").get<std::string>() != kind) {
      throw FormatError("checkpoint holds a " + header.at("kind").get<std::string>() +
                        " model, expected " + std::string(kind));
    }
    Hyperparams hyper = header.at("hyperparams").get<Hyperparams>();
    auto words = header.at("vocabulary").get<std::vector<std::string>>();
    if (words.size() < corpus::kNumReserved || words[0] != corpus::kStartToken ||
        words[1] != corpus::kStopToken || words[2] != corpus::kUnkToken) {
      throw FormatError("checkpoint vocabulary lacks the reserved tokens");
    }
    std::vector<std::string> rest(words.begin() + corpus::kNumReserved, words.end());
    return {hyper, corpus::Vocabulary::from_words(rest)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

// Moves container tensors into `params`, matching names and order.
template <class Params>
void assign_tensors(Params& params, Container& c) {
  auto refs = tensor_refs(params);
  if (refs.size() != c.tensors.size()) {
    throw FormatError("checkpoint has " + std::to_string(c.tensors.size()) + " tensors, expected " +
                      std::to_string(refs.size()));
  }
  for (std::size_t t = 0; t < refs.size(); ++t) {
    if (refs[t].name != c.tensors[t].first) {
      throw FormatError("unexpected tensor " + c.tensors[t].first + ", expected " + refs[t].name);
    }
    *refs[t].value = std::move(c.tensors[t].second);
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

}  // namespace detail

inline void save(const BiLstmModel& model, std::ostream& out) {
  write_container(out, detail::base_header(kKindBiLstm, model.hyper, model.vocab),
                  tensor_refs(model.params));
}

inline BiLstmModel load_bilstm(std::istream& in) {
  Container c = read_container(in);
  auto [hyper, vocab] = detail::parse_base(c.header, kKindBiLstm);
  BiLstmModel model{hyper, std::move(vocab), {}};
  model.params.lstm_left.coupled_gates = hyper.coupled_gates;
  model.params.lstm_right.coupled_gates = hyper.coupled_gates;
  detail::assign_tensors(model.params, c);
  model.validate();
  return model;
}

inline void save(const baselines::RnnLm& model, std::ostream& out) {
  auto header = detail::base_header(kKindRnnLm, model.hyper, model.vocab);
  header["direction"] = std::string(baselines::to_string(model.direction));
  write_container(out, std::move(header), tensor_refs(model.params));
}

inline baselines::RnnLm load_rnnlm(std::istream& in) {
  Container c = read_container(in);
  auto [hyper, vocab] = detail::parse_base(c.header, kKindRnnLm);
  baselines::RnnLm model{baselines::Direction::kLeftToRight, hyper, std::move(vocab), {}};
  try {
    model.direction = baselines::parse_direction(c.header.at("direction").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
  model.params.lstm.coupled_gates = hyper.coupled_gates;
  detail::assign_tensors(model.params, c);
  model.validate();
  return model;
}

template <class Model>
void save_checkpoint(const Model& model, const std::string& path) {
  auto out = detail::open_out(path);
  save(model, out);
}

inline BiLstmModel load_checkpoint(const std::string& path) {
  auto in = detail::open_in(path);
  return load_bilstm(in);
}

inline baselines::RnnLm load_rnnlm_checkpoint(const std::string& path) {
  auto in = detail::open_in(path);
  return load_rnnlm(in);
}

// Reads only the header to report which model kind a file holds.
inline std::string peek_kind(const std::string& path) {
  auto in = detail::open_in(path);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a checkpoint: bad magic bytes");
  }
  std::uint16_t version = 0;
  std::uint32_t len = 0;
  if (!detail::get_le(in, version) || !detail::get_le(in, len)) throw TruncatedError("checkpoint truncated");
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw TruncatedError("checkpoint truncated in header");
  try {
    return nlohmann::json::parse(text).at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

// The in-memory model a save/load round trip produces.
template <class Params>
void round_to_storage(Params& params) {
  params.for_each_tensor([](const std::string&, nk::Matrix& m) {
    for (double& v : m.values()) v = static_cast<double>(static_cast<float>(v));
  });
}

}  // namespace wordchoice::checkpoint
