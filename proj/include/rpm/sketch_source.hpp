#pragma once

#include "rpm/linear_system.hpp"
#include "rpm/random.hpp"
#include "rpm/sketch_vector.hpp"
#include "rpm/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rpm {

enum class SketchKind {
    Gaussian,
    CountSketch,
    UniformWithReplacement,
    RowNormWeighted,
    PermutationWithoutReplacement,
    ColumnPermutation,
    MaxResidual,
    MaxDistance,
    GreedyRandomizedKaczmarz,
    SamplingKaczmarzMotzkin,
    /// Sampling without replacement from a user-supplied finite population.
    Population,
};

struct SketchSpec {
    SketchKind kind = SketchKind::Gaussian;
    int count_sketch_k = 10;
    Index skm_beta = 1;
    int distance_exponent = 2;
    std::vector<Vector> population;
};

/// Parses `gaussian | countsketch:K | uniform | rownorm | cyclic | colcyclic |
/// maxres | maxdist | grk | skm:B`.
SketchSpec parse_sketch_spec(std::string_view token);

/// Canonical token, e.g. "countsketch:10".
std::string sketch_token(const SketchSpec& spec);

/// Name used in benchmark file names, e.g. "CountSketch", "KaczmarzCyc".
std::string sketch_display_name(const SketchSpec& spec);

bool is_adaptive(SketchKind kind) noexcept;
bool is_column_action(SketchKind kind) noexcept;

/// What a selector may see: the system and the current iterate only.
struct SketchContext {
    const LinearSystem& system;
    const Vector& x;
    std::uint64_t iteration = 0;
};

/// Stateful stream of sketch vectors w_0, w_1, ...
///
/// Row-action kinds emit vectors of length n, column-action kinds vectors of
/// length d. Non-adaptive kinds never read `ctx.x`, so their output is a pure
/// function of (seed, dimensions, kind parameters).
class SketchSource {
public:
    SketchSource(SketchSpec spec, const LinearSystem& system, std::uint64_t seed);

    SketchVector next(const SketchContext& ctx);

    SketchVector next_gaussian(const SketchContext& ctx);
    SketchVector next_count_sketch(const SketchContext& ctx);
    SketchVector next_row_sample(const SketchContext& ctx);

    const SketchSpec& spec() const noexcept { return spec_; }
    SketchKind kind() const noexcept { return spec_.kind; }
    bool column_action() const noexcept { return is_column_action(spec_.kind); }
    Index output_dim() const noexcept { return column_action() ? d_ : n_; }

private:
    void require(SketchKind kind, const char* op) const;
    Index next_permuted(std::vector<Index>& remaining, Index size);
    void refill_count_sketch();

    SketchSpec spec_;
    Index n_;
    Index d_;
    Rng rng_;

    // Count sketch: rows of the current K x n block, popped in order.
    std::vector<SketchVector> block_;
    std::size_t block_pos_ = 0;

    // Sampling without replacement: indices not yet drawn this epoch.
    std::vector<Index> remaining_;

    // Row-norm weighting: cumulative squared row norms.
    std::vector<double> cumulative_;
};

/// e_i with i = argmax |A_i x - b_i|; smallest index on ties.
SketchVector select_max_residual(const SketchContext& ctx);

/// e_i with i = argmax |A_i x - b_i| / ||A_i||^exponent; smallest index on
/// ties. Exponent 2 is the default; exponent 1 is the Euclidean distance to
/// the hyperplane. Throws DegenerateError on a zero row.
SketchVector select_max_distance(const SketchContext& ctx, int exponent = 2);

struct GrkCandidates {
    std::vector<Index> rows;
    std::vector<double> probabilities; // proportional to the squared residual
    double threshold = 0.0;            // epsilon of the greedy rule
    Index max_distance_row = -1;       // argmax r_i^2 / ||A_i||^2
};

/// Rows whose squared residual reaches epsilon * ||r||^2 * ||A_i||^2, with
/// epsilon = 0.5 * (max_i r_i^2 / ||A_i||^2 / ||r||^2 + 1 / ||A||_F^2).
/// Throws PreconditionError when the residual is zero.
GrkCandidates grk_candidates(const SketchContext& ctx);

/// Greedy randomized Kaczmarz selection from grk_candidates().
SketchVector select_grk(const SketchContext& ctx, Rng& rng);

/// Sampling Kaczmarz-Motzkin: beta distinct rows drawn uniformly, the one
/// with the largest absolute residual wins (smallest index on ties).
SketchVector select_skm(const SketchContext& ctx, Index beta, Rng& rng);

} // namespace rpm
