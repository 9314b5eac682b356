#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "drcn/core/tensor.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::train {

struct AttentionMaps {
  std::vector<std::string> premise;     // tokens after truncation
  std::vector<std::string> hypothesis;
  std::vector<Tensor> alphas;           // per layer, I x J (premise attending over hypothesis)
  Tensor alpha_avg;                     // mean over layers; empty without attention
  std::vector<double> poolrate_p;       // per premise token, fraction of pooled dims
  std::vector<double> poolrate_q;
};

// Eval-mode forward on one pair, collecting attention weights and the
// positions selected by max pooling.
AttentionMaps attention_maps(model::DrcnModel& model, const text::Vocab& words, const text::Vocab& chars,
                             const std::vector<std::string>& premise, const std::vector<std::string>& hypothesis);

// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

// Header "token,<col tokens>", then one row per row token.
void write_matrix_csv(std::ostream& out, const Tensor& m, const std::vector<std::string>& row_tokens,
                      const std::vector<std::string>& col_tokens);
// Header of tokens, one row of rates.
void write_rate_csv(std::ostream& out, const std::vector<double>& rates, const std::vector<std::string>& tokens);

}  // namespace drcn::train
