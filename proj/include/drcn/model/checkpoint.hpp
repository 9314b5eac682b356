#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "drcn/core/tensor_io.hpp"
#include "drcn/model/drcn_model.hpp"
#include "drcn/text/vocab.hpp"

namespace drcn::model {

// Checkpoint file: a UTF-8 header followed by the binary tensor container.
//
//   drcn-checkpoint 1
//   [config]
//   key=value ...
//   [words] <count>
//   token<TAB>id ...
//   [chars] <count>
//   token<TAB>id ...
//   [tensors]
//   <tensor container: every parameter by name, then bn.running_mean/var>
inline constexpr const char* kCheckpointMagic = "drcn-checkpoint 1";

struct LoadedModel {
  std::unique_ptr<DrcnModel> model;
  text::Vocab words;
  text::Vocab chars;
};

void write_checkpoint(std::ostream& out, const DrcnModel& model, const text::Vocab& words,
                      const text::Vocab& chars, DType dtype = DType::kFloat64);
void save_checkpoint(const std::string& path, const DrcnModel& model, const text::Vocab& words,
                     const text::Vocab& chars, DType dtype = DType::kFloat64);

// Throws IoError when unreadable and FormatError on malformed contents.
LoadedModel read_checkpoint(std::istream& in);
LoadedModel load_checkpoint(const std::string& path);

}  // namespace drcn::model
