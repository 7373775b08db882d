#pragma once

#include <string>

#include "qrgmm/metamodel.hpp"
#include "qrgmm/multioutput.hpp"
#include "qrgmm/nn.hpp"

namespace qrgmm {

enum class ModelKind { single, multi, nn };

// Inspect a model file's envelope without fully loading it.
ModelKind peek_model_kind(const std::string& path);

// JSON documents, format_version 1, doubles rendered with shortest
// round-trippable decimals so a load reproduces predictions bit-exactly.
// Unreadable or structurally broken files raise CorruptFile; a parseable
// envelope with a different format_version raises FormatVersionMismatch.
void save_model(const GenerativeMetamodel& model, const std::string& path);
void save_model(const SequentialModel& model, const std::string& path);
void save_model(const NnQuantileModel& model, const std::string& path);

GenerativeMetamodel load_model(const std::string& path);
SequentialModel load_multi_model(const std::string& path);
NnQuantileModel load_nn_model(const std::string& path);

}  // namespace qrgmm
