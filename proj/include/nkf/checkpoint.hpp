#ifndef NKF_CHECKPOINT_HPP
#define NKF_CHECKPOINT_HPP

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "model.hpp"

namespace nkf {

// A checkpoint is a pair of files sharing a stem: <stem>.json holds the
// shape header, <stem>.bin the parameters as little-endian IEEE-754 doubles
// in the order given by the header.

void write_le_doubles(std::ostream& out, const Eigen::VectorXd& values);
Eigen::VectorXd read_le_doubles(std::istream& in, Index count);

nlohmann::json mlp_header(const Mlp<double>& mlp);
/// Zero-initialized network with the shape described by `header`.
Mlp<double> mlp_from_header(const nlohmann::json& header);

nlohmann::json form_header(const NeuralKForm<double>& form);
NeuralKForm<double> form_from_header(const nlohmann::json& header);

nlohmann::json classifier_header(const KFormClassifier& model);
KFormClassifier classifier_from_header(const nlohmann::json& header);

void save_mlp(const std::filesystem::path& stem, const Mlp<double>& mlp);
Mlp<double> load_mlp(const std::filesystem::path& stem);

void save_form(const std::filesystem::path& stem, const NeuralKForm<double>& form);
NeuralKForm<double> load_form(const std::filesystem::path& stem);

void save_classifier(const std::filesystem::path& stem, const KFormClassifier& model);
KFormClassifier load_classifier(const std::filesystem::path& stem);

/// Loads a classifier or a bare form checkpoint and returns its form.
NeuralKForm<double> load_any_form(const std::filesystem::path& stem);

} // namespace nkf

#endif
