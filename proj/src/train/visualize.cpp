#include "drcn/train/visualize.hpp"

#include <ostream>

#include "drcn/core/errors.hpp"
#include "drcn/text/batching.hpp"
#include "drcn/train/trainer.hpp"

namespace drcn::train {

namespace {

std::vector<double> pool_rates(const ops::PoolRecord& rec, std::size_t steps) {
  std::vector<double> rates(steps, 0.0);
  for (std::size_t k = 0; k < rec.dims; ++k) rates.at(rec.at(0, k)) += 1.0;
  for (auto& r : rates) r /= static_cast<double>(rec.dims);
  return rates;
}

}  // namespace

AttentionMaps attention_maps(model::DrcnModel& model, const text::Vocab& words, const text::Vocab& chars,
                             const std::vector<std::string>& premise, const std::vector<std::string>& hypothesis) {
  if (premise.empty() || hypothesis.empty()) throw ArgumentError("visualize: empty sentence");
  const auto& c = model.config();
  text::SentencePair pair{premise, hypothesis, 0, {}};
  const auto batch = text::make_batch({pair}, words, chars, c.max_len, c.max_word_len);
  Tape tape(false);
  model::ForwardOptions opt;
  opt.diagnostics = true;
  const auto r = model.forward(tape, batch, opt);

  AttentionMaps maps;
  maps.premise.assign(premise.begin(), premise.begin() + static_cast<std::ptrdiff_t>(batch.premise.steps));
  maps.hypothesis.assign(hypothesis.begin(), hypothesis.begin() + static_cast<std::ptrdiff_t>(batch.hypothesis.steps));
  maps.alphas = r.alphas_p;
  if (!maps.alphas.empty()) {
    maps.alpha_avg = Tensor(maps.alphas.front().shape());
    for (const auto& a : maps.alphas) maps.alpha_avg.add_in_place(a);
    maps.alpha_avg.scale_in_place(1.0 / static_cast<double>(maps.alphas.size()));
  }
  maps.poolrate_p = pool_rates(r.pool_p, batch.premise.steps);
  maps.poolrate_q = pool_rates(r.pool_q, batch.hypothesis.steps);
  return maps;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

void write_matrix_csv(std::ostream& out, const Tensor& m, const std::vector<std::string>& row_tokens,
                      const std::vector<std::string>& col_tokens) {
  if (m.rows() != row_tokens.size() || m.cols() != col_tokens.size()) {
    throw DimensionError("csv: matrix " + shape_to_string(m.shape()) + " does not match its labels");
  }
  out << "token";
  for (const auto& t : col_tokens) out << ',' << csv_field(t);
  out << "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << csv_field(row_tokens[i]);
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << format_double(m.at(i, j));
    out << "\n";
  }
}

void write_rate_csv(std::ostream& out, const std::vector<double>& rates, const std::vector<std::string>& tokens) {
  if (rates.size() != tokens.size()) throw DimensionError("csv: rates do not match their tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) out << (i ? "," : "") << csv_field(tokens[i]);
  out << "\n";
  for (std::size_t i = 0; i < rates.size(); ++i) out << (i ? "," : "") << format_double(rates[i]);
  out << "\n";
}

}  // namespace drcn::train
