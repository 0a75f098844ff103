#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "proxyevent/diffcore/ops.hpp"
#include "proxyevent/diffcore/params.hpp"

namespace proxyevent::encoder {

using diffcore::Tensor;

// ---------------------------------------------------------------------------
// Vocabulary

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

class Vocab {
 public:
  Vocab() : tokens_{kPadToken, kUnkToken} {
    index_[kPadToken] = kPadId;
    index_[kUnkToken] = kUnkId;
  }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = index_.emplace(token, tokens_.size());
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Vocab file: one token per line, line number (0-based) = id; the first
  /// two lines are the pad and unk tokens.
  void save(std::ostream& os) const {
    for (const auto& t : tokens_) os << t << '\n';
  }

  static Vocab load(std::istream& is) {
    Vocab v;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (n == kPadId && line != kPadToken) throw ValidationError("vocab line 1 must be " + std::string(kPadToken));
      if (n == kUnkId && line != kUnkToken) throw ValidationError("vocab line 2 must be " + std::string(kUnkToken));
      if (n >= 2) {
        if (v.index_.count(line)) throw ValidationError("vocab token '" + line + "' repeated on line " + std::to_string(n + 1));
        v.add(line);
      }
      ++n;
    }
    if (n < 2) throw ValidationError("vocab file lacks the reserved pad/unk lines");
    return v;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    save(os);
  }
  static Vocab load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open vocab '" + path.string() + "'");
    return load(is);
  }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// BIO labels and span decoding

enum class Bio : std::size_t { B = 0, I = 1, O = 2 };
inline constexpr std::size_t kNumBio = 3;

using BioSequence = std::vector<Bio>;

/// Half-open token span inside one sentence.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

/// Maximal runs that start at B and continue through I. An I with no open
/// span starts a new one.
inline std::vector<Span> decode_spans(const BioSequence& labels) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case Bio::B:
        if (open) spans.back().end = i;
        spans.push_back({i, i + 1});
        open = true;
        break;
      case Bio::I:
        if (!open) {
          spans.push_back({i, i + 1});
          open = true;
        }
        spans.back().end = i + 1;
        break;
      case Bio::O:
        open = false;
        break;
    }
  }
  return spans;
}

inline BioSequence bio_from_spans(std::size_t length, std::span<const Span> spans) {
  BioSequence labels(length, Bio::O);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) throw SpanError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") out of bounds");
    labels[s.start] = Bio::B;
    for (std::size_t i = s.start + 1; i < s.end; ++i) labels[i] = Bio::I;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Parameters

struct EncoderDims {
  std::size_t vocab = 0;
  std::size_t d_emb = 16;
  std::size_t d_h = 32;
};

inline void register_params(diffcore::ParamStore& ps, const EncoderDims& dims, std::mt19937_64& rng) {
  using diffcore::ParamGroup;
  ps.add("encoder.embed", diffcore::normal_init({dims.vocab, dims.d_emb}, 1.0, rng), ParamGroup::Encoder);
  ps.add("encoder.proj.w", diffcore::glorot_init(2 * dims.d_emb, dims.d_h, rng), ParamGroup::Encoder);
  ps.add("encoder.proj.b", Tensor::zeros({1, dims.d_h}), ParamGroup::Encoder);
  ps.add("encoder.bio.w", diffcore::glorot_init(dims.d_h, kNumBio, rng), ParamGroup::Rest);
  ps.add("encoder.bio.b", Tensor::zeros({1, kNumBio}), ParamGroup::Rest);
  ps.add("encoder.epc.w1", diffcore::glorot_init(2 * dims.d_h, dims.d_h, rng), ParamGroup::Rest);
  ps.add("encoder.epc.b1", Tensor::zeros({1, dims.d_h}), ParamGroup::Rest);
  ps.add("encoder.epc.w2", diffcore::glorot_init(dims.d_h, 1, rng), ParamGroup::Rest);
  ps.add("encoder.epc.b2", Tensor::zeros({1, 1}), ParamGroup::Rest);
}

// ---------------------------------------------------------------------------
// Token states

/// All token states of a document stacked sentence after sentence.
struct TokenStates {
  Tensor states;                      // total_tokens x d_h
  Tensor contexts;                    // sentences x d_h
  std::vector<std::size_t> offsets;   // sentence s spans rows [offsets[s], offsets[s+1])

  std::size_t num_sentences() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t sentence_length(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
  Tensor sentence(std::size_t s) const { return diffcore::slice_rows(states, offsets[s], offsets[s + 1]); }
};

/// state = GELU(W [embed(token) ; mean embed of its sentence] + b),
/// context = mean of the sentence's token states.
inline TokenStates encode(const std::vector<std::vector<std::size_t>>& sentence_ids, const diffcore::ParamStore& ps) {
  using namespace diffcore;
  if (sentence_ids.empty()) throw ValidationError("cannot encode a document with no sentences");
  TokenStates out;
  out.offsets.push_back(0);
  std::vector<std::size_t> flat, sentence_of;
  for (std::size_t s = 0; s < sentence_ids.size(); ++s) {
    if (sentence_ids[s].empty()) throw ValidationError("sentence " + std::to_string(s) + " is empty");
    for (auto id : sentence_ids[s]) {
      flat.push_back(id);
      sentence_of.push_back(s);
    }
    out.offsets.push_back(flat.size());
  }
  const Tensor emb = gather_rows(ps.get("encoder.embed"), flat);
  std::vector<Tensor> means;
  for (std::size_t s = 0; s < sentence_ids.size(); ++s) means.push_back(mean_rows(slice_rows(emb, out.offsets[s], out.offsets[s + 1])));
  const Tensor sent_ctx = gather_rows(concat_rows(means), sentence_of);
  out.states = gelu(add(matmul(concat_cols(emb, sent_ctx), ps.get("encoder.proj.w")), ps.get("encoder.proj.b")));
  std::vector<Tensor> ctx;
  for (std::size_t s = 0; s < sentence_ids.size(); ++s) ctx.push_back(mean_rows(out.sentence(s)));
  out.contexts = concat_rows(ctx);
  return out;
}

inline std::vector<std::vector<std::size_t>> to_ids(const std::vector<std::vector<std::string>>& sentences, const Vocab& vocab) {
  std::vector<std::vector<std::size_t>> ids;
  for (const auto& s : sentences) {
    std::vector<std::size_t> row;
    for (const auto& t : s) row.push_back(vocab.id(t));
    ids.push_back(std::move(row));
  }
  return ids;
}

// ---------------------------------------------------------------------------
// BIO tagging

struct Tagging {
  Tensor probs;  // total_tokens x 3
  Tensor loss;   // L_er; undefined when no gold labels were given
};

/// Per-token softmax over {B, I, O}; with gold labels, L_er is the mean
/// token-level cross-entropy.
inline Tagging tag_bio(const TokenStates& ts, const diffcore::ParamStore& ps,
                       const std::vector<BioSequence>* gold = nullptr) {
  using namespace diffcore;
  Tagging out;
  out.probs = softmax(add(matmul(ts.states, ps.get("encoder.bio.w")), ps.get("encoder.bio.b")));
  if (gold != nullptr) {
    if (gold->size() != ts.num_sentences())
      throw DimensionError("BIO alignment: " + std::to_string(gold->size()) + " gold sentences vs " +
                           std::to_string(ts.num_sentences()) + " encoded");
    std::vector<std::size_t> target;
    for (std::size_t s = 0; s < gold->size(); ++s) {
      if ((*gold)[s].size() != ts.sentence_length(s))
        throw DimensionError("BIO alignment: sentence " + std::to_string(s) + " has " + std::to_string((*gold)[s].size()) +
                             " gold labels for " + std::to_string(ts.sentence_length(s)) + " tokens");
      for (Bio b : (*gold)[s]) target.push_back(static_cast<std::size_t>(b));
    }
    const std::vector<double> w(target.size(), 1.0 / static_cast<double>(target.size()));
    out.loss = nll_rows(out.probs, target, w);
  }
  return out;
}

/// Greedy per-token argmax (ties to the lowest label index).
inline std::vector<BioSequence> greedy_labels(const TokenStates& ts, const Tensor& probs) {
  std::vector<BioSequence> out;
  for (std::size_t s = 0; s < ts.num_sentences(); ++s) {
    BioSequence seq;
    for (std::size_t r = ts.offsets[s]; r < ts.offsets[s + 1]; ++r) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < kNumBio; ++c)
        if (probs.at(r, c) > probs.at(r, best)) best = c;
      seq.push_back(static_cast<Bio>(best));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mentions

struct MentionSpan {
  std::size_t sentence = 0;
  Span span;
};

struct MentionInfo {
  std::size_t sentence = 0;
  Span span;
  std::string surface;
  std::size_t entity = 0;  // dense unique-entity index, by first appearance
};

struct MentionReps {
  Tensor vectors;  // mentions x d_h; row i is the mean of mention i's token states
  std::vector<MentionInfo> mentions;
  std::vector<std::string> entity_surfaces;  // indexed by unique-entity index

  std::size_t num_entities() const { return entity_surfaces.size(); }
};

/// Averages token states over each span. Mentions with identical surface
/// token sequences share an entity index.
inline MentionReps mention_reps(const TokenStates& ts, const std::vector<std::vector<std::string>>& sentences,
                                std::span<const MentionSpan> spans) {
  MentionReps out;
  const std::size_t total = ts.states.rows();
  std::vector<double> pool(spans.size() * total, 0.0);
  std::map<std::string, std::size_t> entity_of;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& m = spans[i];
    if (m.sentence >= ts.num_sentences() || m.span.start >= m.span.end || m.span.end > ts.sentence_length(m.sentence))
      throw SpanError("mention span (" + std::to_string(m.sentence) + ", " + std::to_string(m.span.start) + ", " +
                      std::to_string(m.span.end) + ") out of bounds");
    const double w = 1.0 / static_cast<double>(m.span.end - m.span.start);
    for (std::size_t t = m.span.start; t < m.span.end; ++t) pool[i * total + ts.offsets[m.sentence] + t] = w;
    std::string surface;
    for (std::size_t t = m.span.start; t < m.span.end; ++t) surface += (t > m.span.start ? " " : "") + sentences[m.sentence][t];
    auto [it, inserted] = entity_of.emplace(surface, out.entity_surfaces.size());
    if (inserted) out.entity_surfaces.push_back(surface);
    out.mentions.push_back({m.sentence, m.span, surface, it->second});
  }
  if (spans.empty()) {
    out.vectors = Tensor::zeros({0, ts.states.cols()});
  } else {
    out.vectors = diffcore::matmul(Tensor::from({spans.size(), total}, std::move(pool)), ts.states);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entity-pair co-event auxiliary loss

struct PairCoevent {
  Tensor probs;  // pairs x 1, sigmoid(MLP([h_i ; h_j]))
  Tensor loss;   // L_epc, summed binary cross-entropy
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (i, j), i < j, lexicographic
  std::vector<double> labels;
};

/// `together(i, j)` says whether mentions i and j belong to a common gold
/// event. Fewer than two mentions yields a zero loss.
template <class Together>
PairCoevent pair_coevent_loss(const MentionReps& reps, const diffcore::ParamStore& ps, Together together) {
  using namespace diffcore;
  PairCoevent out;
  const std::size_t m = reps.mentions.size();
  if (m < 2) {
    out.loss = Tensor::scalar(0.0);
    return out;
  }
  std::vector<std::size_t> left, right;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      out.pairs.emplace_back(i, j);
      left.push_back(i);
      right.push_back(j);
      out.labels.push_back(together(i, j) ? 1.0 : 0.0);
    }
  const Tensor x = concat_cols(gather_rows(reps.vectors, left), gather_rows(reps.vectors, right));
  const Tensor hidden = gelu(add(matmul(x, ps.get("encoder.epc.w1")), ps.get("encoder.epc.b1")));
  out.probs = sigmoid(add(matmul(hidden, ps.get("encoder.epc.w2")), ps.get("encoder.epc.b2")));
  out.loss = binary_cross_entropy(out.probs, out.labels);
  return out;
}

}  // namespace proxyevent::encoder
