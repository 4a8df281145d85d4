#ifndef ISL_MDP_IO_HPP_
#define ISL_MDP_IO_HPP_

#include <filesystem>

#include "json.hpp"

#include "isl/dp.hpp"

namespace isl {

// JSON layout of a TabularMdp:
//   {
//     "n_states": S, "n_actions": A, "gamma": g,
//     "reward_bounds": [r_min, r_max],          (optional; defaults to the reward range)
//     "reward": [[r(s,a) for a] for s],
//     "kernel": [[[P(s'|s,a) for s'] for a] for s]
//   }

nlohmann::json mdp_to_json(const TabularMdp<double>& mdp);
TabularMdp<double> mdp_from_json(const nlohmann::json& doc);

void save_mdp(const TabularMdp<double>& mdp, const std::filesystem::path& path);
TabularMdp<double> load_mdp(const std::filesystem::path& path);

}  // namespace isl

#endif  // ISL_MDP_IO_HPP_
