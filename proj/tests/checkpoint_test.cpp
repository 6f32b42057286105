#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/synthetic.hpp"
#include "wordchoice/checkpoint.hpp"
#include "wordchoice/error.hpp"

using namespace wordchoice;
namespace fs = std::filesystem;

namespace {

std::string to_bytes(const BiLstmModel& m) {
  std::ostringstream out(std::ios::binary);
  checkpoint::save(m, out);
  return out.str();
}

BiLstmModel from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return checkpoint::load_bilstm(in);
}

BiLstmModel trained_model(std::uint64_t seed) {
  auto tc = synthetic::template_corpus(20, 200, 40, 3);
  auto vocab = corpus::build_vocab(tc.sentences);
  Hyperparams h = fixtures::tiny_hyper(6, seed);
  h.batch_size = 32;
  h.epochs = 2;
  h.lr = 1.0;
  auto m = init_bilstm(vocab, h);
  train_bilstm(m, corpus::encode_corpus(tc.sentences, m.vocab, 40));
  return m;
}

}  // namespace

TEST(Checkpoint, HeaderLayout) {
  auto m = fixtures::random_model(9, 3, 1);
  const std::string bytes = to_bytes(m);
  ASSERT_GT(bytes.size(), 10u);
  EXPECT_EQ(bytes.substr(0, 4), "BLWC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6 + b])) << (8 * b);
  auto header = nlohmann::json::parse(bytes.substr(10, len));
  EXPECT_EQ(header["kind"], "bilstm");
  EXPECT_EQ(header["vocabulary"].size(), 9u);
  EXPECT_EQ(header["vocabulary"][0], "<start>");
  EXPECT_EQ(header["hyperparams"]["hidden"], 3);
  std::size_t floats = 0;
  for (const auto& t : header["tensors"]) floats += t["rows"].get<std::size_t>() * t["cols"].get<std::size_t>();
  EXPECT_EQ(bytes.size(), 10u + len + 4u * floats);
  EXPECT_EQ(header["tensors"][0]["name"], "embed_left");
  EXPECT_EQ(header["tensors"][0]["rows"], 9);
}

TEST(Checkpoint, RoundTripAtStoredPrecision) {
  auto m = fixtures::random_model(30, 5, 2);
  auto loaded = from_bytes(to_bytes(m));
  EXPECT_EQ(loaded.vocab, m.vocab);
  EXPECT_EQ(loaded.hyper.hidden, m.hyper.hidden);
  EXPECT_EQ(loaded.hyper.seed, m.hyper.seed);

  BiLstmModel stored = m;
  checkpoint::round_to_storage(stored.params);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto sent = fixtures::random_sentence(1 + trial % 10, 30, rng);
    const std::size_t pos = 1 + static_cast<std::size_t>(trial) % sent.real_len;
    auto a = suggest(stored, sent, pos, 10);
    auto b = suggest(loaded, sent, pos, 10);
    EXPECT_EQ(a, b);
  }
  // Saving the loaded model reproduces the file.
  EXPECT_EQ(to_bytes(loaded), to_bytes(m));
}

TEST(Checkpoint, SameSeedSameBytes) {
  EXPECT_EQ(to_bytes(trained_model(11)), to_bytes(trained_model(11)));
  EXPECT_NE(to_bytes(trained_model(11)), to_bytes(trained_model(12)));
}

TEST(Checkpoint, FileRoundTrip) {
  auto dir = fs::temp_directory_path() / "wordchoice_checkpoint_test";
  fs::create_directories(dir);
  const std::string path = (dir / "m.blwc").string();
  auto m = fixtures::random_model(12, 4, 5);
  checkpoint::save_checkpoint(m, path);
  EXPECT_EQ(checkpoint::peek_kind(path), "bilstm");
  auto loaded = checkpoint::load_checkpoint(path);
  EXPECT_EQ(loaded.vocab, m.vocab);
  EXPECT_THROW(checkpoint::load_rnnlm_checkpoint(path), FormatError);
  EXPECT_THROW(checkpoint::load_checkpoint((dir / "missing.blwc").string()), IoError);
  fs::remove_all(dir);
}

TEST(Checkpoint, WrongMagic) {
  std::string bytes = to_bytes(fixtures::random_model(9, 3, 1));
  bytes[0] = 'X';
  EXPECT_THROW(from_bytes(bytes), FormatError);
  EXPECT_THROW(from_bytes(""), FormatError);
}

TEST(Checkpoint, Truncated) {
  const std::string bytes = to_bytes(fixtures::random_model(9, 3, 1));
  EXPECT_THROW(from_bytes(bytes.substr(0, 5)), TruncatedError);
  EXPECT_THROW(from_bytes(bytes.substr(0, 20)), TruncatedError);
  EXPECT_THROW(from_bytes(bytes.substr(0, bytes.size() - 3)), TruncatedError);
}

TEST(Checkpoint, TrailingBytes) {
  EXPECT_THROW(from_bytes(to_bytes(fixtures::random_model(9, 3, 1)) + "x"), FormatError);
}

TEST(Checkpoint, CorruptHeader) {
  std::string bytes = to_bytes(fixtures::random_model(9, 3, 1));
  bytes[10] = '#';
  EXPECT_THROW(from_bytes(bytes), FormatError);
}

TEST(Checkpoint, VocabularyRowMismatch) {
  auto m = fixtures::random_model(9, 3, 1);
  auto bigger = m;
  std::vector<std::string> words = m.vocab.words();
  words.push_back("extra");
  bigger.vocab = corpus::Vocabulary::from_words(words);
  EXPECT_THROW(from_bytes(to_bytes(bigger)), DimensionError);
}

TEST(Checkpoint, RnnLmRoundTrip) {
  Hyperparams h = fixtures::tiny_hyper(4, 9);
  auto m = baselines::init_rnnlm(fixtures::numbered_vocab(15), h, baselines::Direction::kRightToLeft);
  oracle::randomize(m.params, 10);
  std::ostringstream out(std::ios::binary);
  checkpoint::save(m, out);
  std::istringstream in(out.str(), std::ios::binary);
  auto loaded = checkpoint::load_rnnlm(in);
  EXPECT_EQ(loaded.direction, baselines::Direction::kRightToLeft);
  EXPECT_EQ(loaded.vocab, m.vocab);
  checkpoint::round_to_storage(m.params);
  std::mt19937_64 rng(11);
  auto sent = fixtures::random_sentence(5, 15, rng);
  EXPECT_EQ(baselines::rnnlm_rank(m, sent, 2, 5), baselines::rnnlm_rank(loaded, sent, 2, 5));

  std::istringstream wrong(out.str(), std::ios::binary);
  EXPECT_THROW(checkpoint::load_bilstm(wrong), FormatError);
}
