#ifndef CONCEPTSEG_CTM_HPP
#define CONCEPTSEG_CTM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conceptseg/params.hpp"
#include "conceptseg/rng.hpp"

namespace conceptseg {

// Concept Translation Module: learnable concept queries cross-attending over
// the reasoning hidden states. Single head, no output projection.
struct CtmConfig {
  int l2 = 8;  // number of concept queries
  int c = 16;  // channel width shared with the hidden states
};

// Adds ctm.queries [L2 x C] and ctm.w_q / ctm.w_k / ctm.w_v [C x C].
void init_ctm_params(ParamStore& store, const CtmConfig& cfg, Rng& rng);

struct CtmNodes {
  NodeRef queries, w_q, w_k, w_v;
};
CtmNodes bind_ctm(const BoundParams& bound);

struct TranslateOut {
  NodeRef z;                          // L2 x C implicit concept groups
  std::uint64_t attn_multiplies = 0;  // multiplies spent in score + mix
};

// Z = softmax((C Wq)(H Wk)^T / sqrt(c)) (H Wv). attn_multiplies counts only
// the two attention products, 2*L1*L2*C in total.
TranslateOut translate(Graph& g, NodeRef h, const CtmNodes& ctm);

// P = [Z; E_text], Z first. Without text rows the prompt is Z itself.
NodeRef assemble_prompt(Graph& g, NodeRef z, std::optional<NodeRef> e_text);

// Whitespace-tokenized answer vocabulary; unknown words share one row.
struct TextVocab {
  std::vector<std::string> words;
  int oov_index = 0;

  int index_of(const std::string& word) const;
  std::vector<int> tokenize(const std::string& phrase) const;
  int rows() const { return static_cast<int>(words.size()) + 1; }  // + shared OOV row

  static TextVocab standard();
};

// Adds text.embed [(|vocab|+1) x C]; row oov_index is the shared unknown row.
void init_text_params(ParamStore& store, const TextVocab& vocab, int c, Rng& rng);

// Gathers the embedding rows for the phrase's tokens: T x C.
NodeRef embed_text(Graph& g, NodeRef embed_table, const TextVocab& vocab,
                   const std::string& phrase);

}  // namespace conceptseg

#endif
