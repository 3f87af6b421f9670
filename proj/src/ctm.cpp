#include "conceptseg/ctm.hpp"

#include <cmath>

#include "conceptseg/scene.hpp"

namespace conceptseg {

void init_ctm_params(ParamStore& store, const CtmConfig& cfg, Rng& rng) {
  if (cfg.l2 < 1) throw ContractError("CtmConfig: l2 must be >= 1");
  const double r = 1.0 / std::sqrt(static_cast<double>(cfg.c));
  auto mk = [&](std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::random_uniform(rows, cols, r, rng);
    t.requires_grad = true;
    return t;
  };
  store.add("ctm.queries", mk(static_cast<std::size_t>(cfg.l2), static_cast<std::size_t>(cfg.c)));
  store.add("ctm.w_q", mk(static_cast<std::size_t>(cfg.c), static_cast<std::size_t>(cfg.c)));
  store.add("ctm.w_k", mk(static_cast<std::size_t>(cfg.c), static_cast<std::size_t>(cfg.c)));
  store.add("ctm.w_v", mk(static_cast<std::size_t>(cfg.c), static_cast<std::size_t>(cfg.c)));
}

CtmNodes bind_ctm(const BoundParams& bound) {
  return CtmNodes{bound.at("ctm.queries"), bound.at("ctm.w_q"), bound.at("ctm.w_k"),
                  bound.at("ctm.w_v")};
}

TranslateOut translate(Graph& g, NodeRef h, const CtmNodes& ctm) {
  const Tensor& hv = g.value(h);
  const Tensor& qv = g.value(ctm.queries);
  if (hv.cols != qv.cols)
    throw ContractError("translate: H has " + hv.shape_str() + " but queries have " +
                        qv.shape_str());

  NodeRef q = g.matmul(ctm.queries, ctm.w_q);  // L2 x C
  NodeRef k = g.matmul(h, ctm.w_k);            // L1 x C
  NodeRef v = g.matmul(h, ctm.w_v);            // L1 x C

  const std::uint64_t before = g.matmul_multiplies();
  NodeRef scores = g.matmul(q, g.transpose(k));  // L2 x L1
  NodeRef attn = g.softmax_rows(g.scale(scores, 1.0 / std::sqrt(static_cast<double>(qv.cols))));
  NodeRef z = g.matmul(attn, v);  // L2 x C
  const std::uint64_t after = g.matmul_multiplies();

  return TranslateOut{z, after - before};
}

NodeRef assemble_prompt(Graph& g, NodeRef z, std::optional<NodeRef> e_text) {
  if (!e_text.has_value()) return z;
  const Tensor& zv = g.value(z);
  const Tensor& ev = g.value(*e_text);
  if (ev.rows == 0) return z;
  if (zv.cols != ev.cols)
    throw ContractError("assemble_prompt: column mismatch, " + zv.shape_str() + " vs " +
                        ev.shape_str());
  return g.concat_rows(z, *e_text);
}

int TextVocab::index_of(const std::string& word) const {
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i] == word) return static_cast<int>(i);
  return oov_index;
}

std::vector<int> TextVocab::tokenize(const std::string& phrase) const {
  std::vector<int> ids;
  std::string word;
  for (char c : phrase) {
    if (c == ' ' || c == '\t' || c == '\n') {
      if (!word.empty()) ids.push_back(index_of(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) ids.push_back(index_of(word));
  return ids;
}

TextVocab TextVocab::standard() {
  TextVocab v;
  v.words = {"red",  "green",   "blue",   "yellow", "cyan",
             "magenta", "orange", "purple", "rect",   "disc"};
  v.oov_index = static_cast<int>(v.words.size());
  return v;
}

void init_text_params(ParamStore& store, const TextVocab& vocab, int c, Rng& rng) {
  // Stands in for a pretrained text encoder: color rows carry their RGB and
  // luminance, shape rows a shape flag. Rows stay trainable.
  const double scale = 10.0;
  Tensor t = Tensor::random_uniform(static_cast<std::size_t>(vocab.rows()),
                                    static_cast<std::size_t>(c), 0.05 * scale, rng);
  for (std::size_t row = 0; row < vocab.words.size(); ++row) {
    const std::string& word = vocab.words[row];
    if (word == "rect") {
      t.at(row, 4) += scale;
    } else if (word == "disc") {
      t.at(row, 5) += scale;
    } else {
      for (const PaletteColor& pc : palette())
        if (word == pc.name) {
          t.at(row, 0) += scale * pc.rgb[0];
          t.at(row, 1) += scale * pc.rgb[1];
          t.at(row, 2) += scale * pc.rgb[2];
          t.at(row, 3) += scale * luminance(pc.rgb);
        }
    }
  }
  t.requires_grad = true;
  store.add("text.embed", std::move(t));
}

NodeRef embed_text(Graph& g, NodeRef embed_table, const TextVocab& vocab,
                   const std::string& phrase) {
  return g.gather_rows(embed_table, vocab.tokenize(phrase));
}

}  // namespace conceptseg
