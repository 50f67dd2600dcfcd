#include <string>

#include "operon/container_io.hpp"
#include "operon/gp.hpp"

namespace operon {

namespace {

nlohmann::json arch_to_json(const MeanArchitecture& arch) {
  return {{"variant", mean_variant_name(arch.variant)},
          {"feature_dim", arch.feature_dim},
          {"coord_dim", arch.coord_dim},
          {"output_count", arch.output_count},
          {"mlp_hidden", arch.mlp_hidden},
          {"branch_hidden", arch.branch_hidden},
          {"trunk_hidden", arch.trunk_hidden},
          {"latent_dim", arch.latent_dim}};
}

MeanArchitecture arch_from_json(const nlohmann::json& spec) {
  MeanArchitecture arch;
  arch.variant = mean_variant_from_name(spec.at("variant").get<std::string>());
  arch.feature_dim = spec.at("feature_dim").get<Index>();
  arch.coord_dim = spec.at("coord_dim").get<Index>();
  arch.output_count = spec.at("output_count").get<Index>();
  arch.mlp_hidden = spec.at("mlp_hidden").get<std::vector<Index>>();
  arch.branch_hidden = spec.at("branch_hidden").get<std::vector<Index>>();
  arch.trunk_hidden = spec.at("trunk_hidden").get<std::vector<Index>>();
  arch.latent_dim = spec.at("latent_dim").get<Index>();
  return arch;
}

}  // namespace

void save_model(const std::string& path, const TrainedOperatorGP& model) {
  ArrayContainer box;
  box.metadata = {
      {"version", 1},
      {"N", model.sample_count()},
      {"p", model.pca ? model.pca->input_dim() : model.features.cols()},
      {"feature_dim", model.features.cols()},
      {"q", model.grid_size()},
      {"d", model.y.cols()},
      {"S", model.output_count()},
      {"kernel",
       {{"input_family", kernel_family_name(model.kernel.input.family)},
        {"output_family", kernel_family_name(model.kernel.output.family)},
        {"log_sigma2_phi", model.kernel.input.log_sigma2}}},
      {"mean", arch_to_json(model.mean.arch)},
      {"jitter_used",
       {{"phi", model.chol_phi.jitter_used}, {"y", model.chol_y.jitter_used}}},
      {"pca", model.pca.has_value()},
  };

  box.add("features", model.features);
  box.add("y", model.y);
  for (Index s = 0; s < model.output_count(); ++s)
    box.add("v" + std::to_string(s), model.v[s]);
  for (Index s = 0; s < model.output_count(); ++s)
    box.add("w" + std::to_string(s), model.w[s]);
  box.add("theta", model.mean.theta);
  box.add("log_beta_phi", model.kernel.input.log_beta);
  box.add("log_beta_y", model.kernel.output.log_beta);
  box.add("chol_phi_lower", model.chol_phi.lower);
  box.add("chol_y_lower", model.chol_y.lower);
  if (model.pca) {
    box.add("pca_mean", model.pca->mean);
    box.add("pca_components", model.pca->components);
  }
  write_container(path, kModelMagic, box);
}

TrainedOperatorGP load_model(const std::string& path) {
  const ArrayContainer box = read_container(path, kModelMagic);
  const nlohmann::json& meta = box.metadata;
  if (meta.at("version").get<int>() != 1)
    throw UnsupportedVersion("model: unknown version");

  TrainedOperatorGP model;
  model.features = box.get("features");
  model.y = box.get("y");
  const Index s_count = meta.at("S").get<Index>();
  for (Index s = 0; s < s_count; ++s) model.v.push_back(box.get("v" + std::to_string(s)));
  for (Index s = 0; s < s_count; ++s) model.w.push_back(box.get("w" + std::to_string(s)));

  model.kernel.input.family =
      kernel_family_from_name(meta.at("kernel").at("input_family").get<std::string>());
  model.kernel.output.family =
      kernel_family_from_name(meta.at("kernel").at("output_family").get<std::string>());
  model.kernel.input.log_sigma2 = meta.at("kernel").at("log_sigma2_phi").get<double>();
  model.kernel.output.log_sigma2 = 0.0;
  model.kernel.input.log_beta = box.get("log_beta_phi").col(0);
  model.kernel.output.log_beta = box.get("log_beta_y").col(0);

  model.mean.arch = arch_from_json(meta.at("mean"));
  model.mean.theta = box.get("theta").col(0);
  if (model.mean.theta.size() != parameter_count(model.mean.arch))
    throw ShapeMismatch("model: theta length does not match architecture");

  model.chol_phi.lower = box.get("chol_phi_lower");
  model.chol_phi.jitter_used = meta.at("jitter_used").at("phi").get<double>();
  model.chol_y.lower = box.get("chol_y_lower");
  model.chol_y.jitter_used = meta.at("jitter_used").at("y").get<double>();

  if (meta.at("pca").get<bool>()) {
    PcaBasis basis;
    basis.mean = box.get("pca_mean").col(0);
    basis.components = box.get("pca_components");
    model.pca = std::move(basis);
  }

  for (const Matrix& vs : model.v)
    if (vs.rows() != model.grid_size() || vs.cols() != model.sample_count())
      throw ShapeMismatch("model: stored outputs have inconsistent shape");
  return model;
}

}  // namespace operon
