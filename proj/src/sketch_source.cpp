#include "rpm/sketch_source.hpp"

#include "rpm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rpm {

namespace {

struct KindName {
    SketchKind kind;
    const char* token;
    const char* display;
};

constexpr KindName kKindNames[] = {
    {SketchKind::Gaussian, "gaussian", "Gaussian"},
    {SketchKind::CountSketch, "countsketch", "CountSketch"},
    {SketchKind::UniformWithReplacement, "uniform", "KaczmarzWR"},
    {SketchKind::RowNormWeighted, "rownorm", "RowNorm"},
    {SketchKind::PermutationWithoutReplacement, "cyclic", "KaczmarzCyc"},
    {SketchKind::ColumnPermutation, "colcyclic", "GaussSeidelCyc"},
    {SketchKind::MaxResidual, "maxres", "MaxResidual"},
    {SketchKind::MaxDistance, "maxdist", "MaxDistance"},
    {SketchKind::GreedyRandomizedKaczmarz, "grk", "GRK"},
    {SketchKind::SamplingKaczmarzMotzkin, "skm", "SKM"},
    {SketchKind::Population, "population", "Population"},
};

const KindName& name_of(SketchKind kind) {
    for (const auto& k : kKindNames) {
        if (k.kind == kind) {
            return k;
        }
    }
    throw InvalidArgument("unknown sketch kind");
}

long long parse_positive(std::string_view text, std::string_view token) {
    long long value = 0;
    if (text.empty()) {
        throw InvalidArgument("missing parameter in strategy '" + std::string(token) + "'");
    }
    for (char c : text) {
        if (c < '0' || c > '9') {
            throw InvalidArgument("bad parameter in strategy '" + std::string(token) + "'");
        }
        value = value * 10 + (c - '0');
        if (value > 1'000'000'000) {
            throw InvalidArgument("parameter too large in strategy '" + std::string(token) + "'");
        }
    }
    return value;
}

Vector squared_row_norms(const Matrix& a) { return a.rowwise().squaredNorm(); }

} // namespace

SketchSpec parse_sketch_spec(std::string_view token) {
    const auto colon = token.find(':');
    const std::string_view head = token.substr(0, colon);
    const std::string_view param =
        colon == std::string_view::npos ? std::string_view{} : token.substr(colon + 1);

    SketchSpec spec;
    if (head == "countsketch") {
        spec.kind = SketchKind::CountSketch;
        spec.count_sketch_k = param.empty() ? 10 : static_cast<int>(parse_positive(param, token));
        if (spec.count_sketch_k < 1) {
            throw InvalidArgument("count sketch needs K >= 1");
        }
        return spec;
    }
    if (head == "skm") {
        spec.kind = SketchKind::SamplingKaczmarzMotzkin;
        spec.skm_beta = static_cast<Index>(parse_positive(param, token));
        if (spec.skm_beta < 1) {
            throw InvalidArgument("skm needs a subset size >= 1");
        }
        return spec;
    }
    if (head == "maxdist" && !param.empty()) {
        spec.kind = SketchKind::MaxDistance;
        spec.distance_exponent = static_cast<int>(parse_positive(param, token));
        if (spec.distance_exponent != 1 && spec.distance_exponent != 2) {
            throw InvalidArgument("maxdist exponent must be 1 or 2");
        }
        return spec;
    }
    if (!param.empty()) {
        throw InvalidArgument("strategy '" + std::string(token) + "' takes no parameter");
    }
    for (const auto& k : kKindNames) {
        if (head == k.token && k.kind != SketchKind::Population) {
            spec.kind = k.kind;
            return spec;
        }
    }
    throw InvalidArgument("unknown strategy '" + std::string(token) + "'");
}

std::string sketch_token(const SketchSpec& spec) {
    std::string token = name_of(spec.kind).token;
    if (spec.kind == SketchKind::CountSketch) {
        token += ":" + std::to_string(spec.count_sketch_k);
    } else if (spec.kind == SketchKind::SamplingKaczmarzMotzkin) {
        token += ":" + std::to_string(spec.skm_beta);
    } else if (spec.kind == SketchKind::MaxDistance && spec.distance_exponent != 2) {
        token += ":" + std::to_string(spec.distance_exponent);
    }
    return token;
}

std::string sketch_display_name(const SketchSpec& spec) { return name_of(spec.kind).display; }

bool is_adaptive(SketchKind kind) noexcept {
    switch (kind) {
    case SketchKind::MaxResidual:
    case SketchKind::MaxDistance:
    case SketchKind::GreedyRandomizedKaczmarz:
    case SketchKind::SamplingKaczmarzMotzkin:
        return true;
    default:
        return false;
    }
}

bool is_column_action(SketchKind kind) noexcept { return kind == SketchKind::ColumnPermutation; }

SketchSource::SketchSource(SketchSpec spec, const LinearSystem& system, std::uint64_t seed)
    : spec_(std::move(spec)), n_(system.rows()), d_(system.cols()), rng_(seed) {
    switch (spec_.kind) {
    case SketchKind::CountSketch:
        if (spec_.count_sketch_k < 1) {
            throw InvalidArgument("count sketch needs K >= 1");
        }
        break;
    case SketchKind::RowNormWeighted: {
        const Vector norms = squared_row_norms(system.a());
        cumulative_.resize(static_cast<std::size_t>(n_));
        double total = 0.0;
        for (Index i = 0; i < n_; ++i) {
            total += norms[i];
            cumulative_[static_cast<std::size_t>(i)] = total;
        }
        if (!(total > 0.0)) {
            throw DegenerateError("row-norm sampling needs a nonzero matrix");
        }
        break;
    }
    case SketchKind::SamplingKaczmarzMotzkin:
        if (spec_.skm_beta < 1 || spec_.skm_beta > n_) {
            throw InvalidArgument("skm subset size must lie in [1, n]");
        }
        break;
    case SketchKind::MaxDistance:
        if (spec_.distance_exponent != 1 && spec_.distance_exponent != 2) {
            throw InvalidArgument("maxdist exponent must be 1 or 2");
        }
        break;
    case SketchKind::Population:
        if (spec_.population.empty()) {
            throw InvalidArgument("population sampling needs at least one vector");
        }
        for (const auto& w : spec_.population) {
            if (w.size() != n_) {
                throw DimensionError("population vectors must have length n");
            }
        }
        break;
    default:
        break;
    }
}

void SketchSource::require(SketchKind kind, const char* op) const {
    if (spec_.kind != kind) {
        throw PreconditionError(std::string(op) + " called on a '" + sketch_token(spec_) +
                                "' source");
    }
}

SketchVector SketchSource::next(const SketchContext& ctx) {
    switch (spec_.kind) {
    case SketchKind::Gaussian:
        return next_gaussian(ctx);
    case SketchKind::CountSketch:
        return next_count_sketch(ctx);
    case SketchKind::UniformWithReplacement:
    case SketchKind::RowNormWeighted:
    case SketchKind::PermutationWithoutReplacement:
        return next_row_sample(ctx);
    case SketchKind::ColumnPermutation:
        return SketchVector::basis(d_, next_permuted(remaining_, d_));
    case SketchKind::Population: {
        const auto size = static_cast<Index>(spec_.population.size());
        return SketchVector::from_dense(
            spec_.population[static_cast<std::size_t>(next_permuted(remaining_, size))]);
    }
    case SketchKind::MaxResidual:
        return select_max_residual(ctx);
    case SketchKind::MaxDistance:
        return select_max_distance(ctx, spec_.distance_exponent);
    case SketchKind::GreedyRandomizedKaczmarz:
        // A solved system has no candidate set; any row yields a null step.
        if (signed_residual(ctx.system, ctx.x).squaredNorm() == 0.0) {
            return SketchVector::basis(n_, 0);
        }
        return select_grk(ctx, rng_);
    case SketchKind::SamplingKaczmarzMotzkin:
        return select_skm(ctx, spec_.skm_beta, rng_);
    }
    throw InvalidArgument("unknown sketch kind");
}

SketchVector SketchSource::next_gaussian(const SketchContext&) {
    require(SketchKind::Gaussian, "next_gaussian");
    SketchVector w(n_);
    for (Index i = 0; i < n_; ++i) {
        w.push(i, rng_.normal());
    }
    return w;
}

void SketchSource::refill_count_sketch() {
    const auto k = static_cast<std::size_t>(spec_.count_sketch_k);
    block_.assign(k, SketchVector(n_));
    for (Index j = 0; j < n_; ++j) {
        const auto bucket = rng_.below(k);
        const double sign = rng_.rademacher();
        block_[bucket].push(j, sign);
    }
    block_pos_ = 0;
}

SketchVector SketchSource::next_count_sketch(const SketchContext&) {
    require(SketchKind::CountSketch, "next_count_sketch");
    if (block_pos_ >= block_.size()) {
        refill_count_sketch();
    }
    return block_[block_pos_++];
}

Index SketchSource::next_permuted(std::vector<Index>& remaining, Index size) {
    if (remaining.empty()) {
        remaining.resize(static_cast<std::size_t>(size));
        std::iota(remaining.begin(), remaining.end(), Index{0});
        // Fisher-Yates; the epoch is consumed from the back.
        for (std::size_t i = remaining.size(); i > 1; --i) {
            std::swap(remaining[i - 1], remaining[rng_.below(i)]);
        }
    }
    const Index next = remaining.back();
    remaining.pop_back();
    return next;
}

SketchVector SketchSource::next_row_sample(const SketchContext&) {
    switch (spec_.kind) {
    case SketchKind::UniformWithReplacement:
        return SketchVector::basis(n_, static_cast<Index>(rng_.below(static_cast<std::uint64_t>(n_))));
    case SketchKind::RowNormWeighted: {
        const double target = rng_.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        if (it == cumulative_.end()) {
            --it;
        }
        return SketchVector::basis(n_, static_cast<Index>(it - cumulative_.begin()));
    }
    case SketchKind::PermutationWithoutReplacement:
        return SketchVector::basis(n_, next_permuted(remaining_, n_));
    default:
        throw PreconditionError("next_row_sample called on a '" + sketch_token(spec_) + "' source");
    }
}

SketchVector select_max_residual(const SketchContext& ctx) {
    const Vector r = signed_residual(ctx.system, ctx.x);
    Index best = 0;
    double best_value = std::abs(r[0]);
    for (Index i = 1; i < r.size(); ++i) {
        const double v = std::abs(r[i]);
        if (v > best_value) {
            best = i;
            best_value = v;
        }
    }
    return SketchVector::basis(r.size(), best);
}

SketchVector select_max_distance(const SketchContext& ctx, int exponent) {
    if (exponent != 1 && exponent != 2) {
        throw InvalidArgument("maxdist exponent must be 1 or 2");
    }
    const Vector r = signed_residual(ctx.system, ctx.x);
    const Vector norms2 = squared_row_norms(ctx.system.a());
    Index best = -1;
    double best_value = -1.0;
    for (Index i = 0; i < r.size(); ++i) {
        if (norms2[i] == 0.0) {
            throw DegenerateError("max-distance selection hit zero row " + std::to_string(i));
        }
        const double denom = exponent == 2 ? norms2[i] : std::sqrt(norms2[i]);
        const double v = std::abs(r[i]) / denom;
        if (v > best_value) {
            best = i;
            best_value = v;
        }
    }
    return SketchVector::basis(r.size(), best);
}

GrkCandidates grk_candidates(const SketchContext& ctx) {
    const Vector r = signed_residual(ctx.system, ctx.x);
    const Vector norms2 = squared_row_norms(ctx.system.a());
    const double r2 = r.squaredNorm();
    if (!(r2 > 0.0)) {
        throw PreconditionError("greedy randomized Kaczmarz needs a nonzero residual");
    }
    const double frob2 = norms2.sum();

    GrkCandidates out;
    double max_score = -1.0;
    for (Index i = 0; i < r.size(); ++i) {
        if (norms2[i] > 0.0) {
            const double score = r[i] * r[i] / norms2[i];
            if (score > max_score) {
                max_score = score;
                out.max_distance_row = i;
            }
        }
    }
    out.threshold = 0.5 * (max_score / r2 + 1.0 / frob2);

    double total = 0.0;
    for (Index i = 0; i < r.size(); ++i) {
        if (norms2[i] == 0.0) {
            continue;
        }
        const double score = r[i] * r[i] / norms2[i];
        // The argmax row always qualifies in exact arithmetic; keep it even if
        // rounding puts it a hair under the threshold.
        if (score >= out.threshold * r2 || i == out.max_distance_row) {
            out.rows.push_back(i);
            out.probabilities.push_back(r[i] * r[i]);
            total += r[i] * r[i];
        }
    }
    for (double& p : out.probabilities) {
        p /= total;
    }
    return out;
}

SketchVector select_grk(const SketchContext& ctx, Rng& rng) {
    const GrkCandidates c = grk_candidates(ctx);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < c.rows.size(); ++k) {
        acc += c.probabilities[k];
        if (u < acc) {
            return SketchVector::basis(ctx.system.rows(), c.rows[k]);
        }
    }
    return SketchVector::basis(ctx.system.rows(), c.rows.back());
}

SketchVector select_skm(const SketchContext& ctx, Index beta, Rng& rng) {
    const Index n = ctx.system.rows();
    if (beta < 1 || beta > n) {
        throw InvalidArgument("skm subset size must lie in [1, n]");
    }
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    // Partial Fisher-Yates: the first beta slots become the subset.
    for (Index i = 0; i < beta; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::sort(pool.begin(), pool.begin() + beta);

    const Matrix& a = ctx.system.a();
    const Vector& b = ctx.system.b();
    Index best = -1;
    double best_value = -1.0;
    for (Index s = 0; s < beta; ++s) {
        const Index i = pool[static_cast<std::size_t>(s)];
        const double v = std::abs(a.row(i).dot(ctx.x) - b[i]);
        if (v > best_value) {
            best = i;
            best_value = v;
        }
    }
    return SketchVector::basis(n, best);
}

} // namespace rpm
