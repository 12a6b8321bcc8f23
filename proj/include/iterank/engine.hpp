#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "iterank/graph.hpp"
#include "iterank/phase1.hpp"
#include "iterank/phase2.hpp"

namespace iterank {

struct EngineConfig {
    Phase1Config phase1;
    Phase2Config phase2;
};

struct UserRun {
    UserId user = 0;
    Phase1Result phase1;
    Phase2Result phase2;
    ScoredItems scores;
};

/// Both walks for one target user over a shared, read-only graph. `run` is const and
/// keeps all scratch state local, so distinct users may be processed concurrently.
class Engine {
public:
    Engine(UPNet graph, EngineConfig cfg)
        : graph_(std::move(graph)),
          ops_(upnet_operators(graph_)),
          prnet_(graph_.n_items()),
          prnet_ops_(prnet_operators(graph_.n_items())),
          cfg_(cfg) {
        cfg_.phase1.validate();
        cfg_.phase2.validate();
    }

    const UPNet& graph() const noexcept { return graph_; }
    const EngineConfig& config() const noexcept { return cfg_; }
    const StochasticOperator& L() const noexcept { return ops_.first; }
    const StochasticOperator& M() const noexcept { return ops_.second; }

    /// Throws ColdStartError when `target` holds no preference.
    UserRun run(UserId target) const {
        UserRun out;
        out.user = target;
        const auto d = personalization_vector(graph_, target);
        out.phase1 = iterate_phase1(ops_.first, ops_.second, d, cfg_.phase1);
        const auto q = build_q(graph_, out.phase1.c, prnet_);
        out.phase2 = iterate_phase2(prnet_ops_.first, prnet_ops_.second, q, cfg_.phase2);
        out.scores = score_items(out.phase2);
        return out;
    }

    std::vector<ItemId> recommend(UserId target, std::size_t k, std::span<const ItemId> exclude) const {
        return recommend_topk(run(target).scores, k, exclude);
    }

private:
    UPNet graph_;
    std::pair<StochasticOperator, StochasticOperator> ops_;
    PRNet prnet_;
    std::pair<PrnetW, PrnetT> prnet_ops_;
    EngineConfig cfg_;
};

}  // namespace iterank
