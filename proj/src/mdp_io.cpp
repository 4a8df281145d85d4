#include "isl/mdp_io.hpp"

#include <fstream>

namespace isl {

nlohmann::json mdp_to_json(const TabularMdp<double>& mdp) {
  nlohmann::json doc;
  doc["n_states"] = mdp.n_states;
  doc["n_actions"] = mdp.n_actions;
  doc["gamma"] = mdp.gamma;
  doc["reward_bounds"] = {mdp.r_min, mdp.r_max};
  auto reward = nlohmann::json::array();
  auto kernel = nlohmann::json::array();
  for (Index s = 0; s < mdp.n_states; ++s) {
    auto reward_row = nlohmann::json::array();
    auto kernel_rows = nlohmann::json::array();
    for (Index a = 0; a < mdp.n_actions; ++a) {
      reward_row.push_back(mdp.reward(s, a));
      auto next = nlohmann::json::array();
      for (Index t = 0; t < mdp.n_states; ++t) next.push_back(mdp.kernel(mdp.row(s, a), t));
      kernel_rows.push_back(std::move(next));
    }
    reward.push_back(std::move(reward_row));
    kernel.push_back(std::move(kernel_rows));
  }
  doc["reward"] = std::move(reward);
  doc["kernel"] = std::move(kernel);
  return doc;
}

TabularMdp<double> mdp_from_json(const nlohmann::json& doc) {
  TabularMdp<double> mdp;
  try {
    mdp.n_states = doc.at("n_states").get<Index>();
    mdp.n_actions = doc.at("n_actions").get<Index>();
    mdp.gamma = doc.at("gamma").get<double>();
    require(mdp.n_states >= 1 && mdp.n_actions >= 1, "mdp json: sizes must be positive");
    const auto& reward = doc.at("reward");
    const auto& kernel = doc.at("kernel");
    require(reward.size() == static_cast<std::size_t>(mdp.n_states) &&
                kernel.size() == static_cast<std::size_t>(mdp.n_states),
            "mdp json: reward/kernel must have n_states rows");
    mdp.reward.resize(mdp.n_states, mdp.n_actions);
    mdp.kernel.resize(mdp.n_states * mdp.n_actions, mdp.n_states);
    for (Index s = 0; s < mdp.n_states; ++s) {
      const auto& r_row = reward.at(static_cast<std::size_t>(s));
      const auto& k_rows = kernel.at(static_cast<std::size_t>(s));
      require(r_row.size() == static_cast<std::size_t>(mdp.n_actions) &&
                  k_rows.size() == static_cast<std::size_t>(mdp.n_actions),
              "mdp json: each state needs n_actions entries");
      for (Index a = 0; a < mdp.n_actions; ++a) {
        mdp.reward(s, a) = r_row.at(static_cast<std::size_t>(a)).get<double>();
        const auto& next = k_rows.at(static_cast<std::size_t>(a));
        require(next.size() == static_cast<std::size_t>(mdp.n_states),
                "mdp json: each kernel row needs n_states entries");
        for (Index t = 0; t < mdp.n_states; ++t) {
          mdp.kernel(mdp.row(s, a), t) = next.at(static_cast<std::size_t>(t)).get<double>();
        }
      }
    }
    if (doc.contains("reward_bounds")) {
      mdp.r_min = doc["reward_bounds"].at(0).get<double>();
      mdp.r_max = doc["reward_bounds"].at(1).get<double>();
    } else {
      mdp.r_min = mdp.reward.minCoeff();
      mdp.r_max = mdp.reward.maxCoeff();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("mdp json: ") + e.what());
  }
  mdp.validate();
  return mdp;
}

void save_mdp(const TabularMdp<double>& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot open " + path.string() + " for writing");
  out << mdp_to_json(mdp).dump(2) << '\n';
}

TabularMdp<double> load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return mdp_from_json(doc);
}

}  // namespace isl
