#include "ledt/metrics.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "ledt/linalg.hpp"

namespace ledt {

namespace {

void mean_and_cov(const Mat& rows, Mat& mu, Mat& sigma) {
    const int n = rows.rows, d = rows.cols;
    if (n < 2) throw std::invalid_argument("frechet_distance: need at least 2 rows per set");
    mu = Mat(1, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mu(0, j) += rows(i, j);
    mu = scale(mu, 1.0 / n);
    sigma = Mat(d, d);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a) {
            const double da = rows(i, a) - mu(0, a);
            for (int b = a; b < d; ++b) sigma(a, b) += da * (rows(i, b) - mu(0, b));
        }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            sigma(a, b) /= (n - 1.0);
            sigma(b, a) = sigma(a, b);
        }
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
    if (a.rows.cols != b.rows.cols) throw std::invalid_argument("frechet_distance: dim mismatch");
    Mat mu_a, s_a, mu_b, s_b;
    mean_and_cov(a.rows, mu_a, s_a);
    mean_and_cov(b.rows, mu_b, s_b);

    const Mat root_a = sqrt_psd(s_a, 1e-10 * std::max(1.0, max_abs(s_a)));
    const Mat inner = matmul(root_a, matmul(s_b, root_a));
    std::vector<double> w;
    Mat v;
    jacobi_eigh(scale(add(inner, transpose(inner)), 0.5), w, v);
    const double neg_tol = 1e-10 * std::max(1.0, std::fabs(w.back()));
    double tr_sqrt = 0.0;
    for (double ev : w) {
        if (ev < -neg_tol) throw std::runtime_error("frechet_distance: cross term not PSD");
        tr_sqrt += std::sqrt(std::max(ev, 0.0));
    }

    const double mean_term = sum_sq(sub(mu_a, mu_b));
    const double d2 = mean_term + trace(s_a) + trace(s_b) - 2.0 * tr_sqrt;
    if (d2 < -1e-8) throw std::runtime_error("frechet_distance: negative distance beyond tolerance");
    return std::max(d2, 0.0);
}

double diversity_score(const FeatureSet& fakes) {
    const int n = fakes.rows.rows;
    if (n < 2) throw std::invalid_argument("diversity_score: need at least 2 rows");
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = 0.0;
            for (int k = 0; k < fakes.rows.cols; ++k) {
                const double t = fakes.rows(i, k) - fakes.rows(j, k);
                d += t * t;
            }
            total += std::sqrt(d);
        }
    return total / (0.5 * n * (n - 1));
}

std::vector<CategoryReport> evaluate(const WorldSpec& world, const std::vector<Sample>& dataset,
                                     int fake_count, const Rng& rng, const EditFn& edit) {
    if (fake_count < 2) throw std::invalid_argument("evaluate: fake_count must be at least 2");
    std::vector<CategoryReport> reports;
    for (int c = world.cfg.n_seen; c < world.n_categories(); ++c) {
        std::vector<const Sample*> reals;
        for (const Sample& s : dataset)
            if (s.category == c) reals.push_back(&s);
        if (static_cast<int>(reals.size()) < fake_count)
            throw std::runtime_error("evaluate: insufficient real samples for category " +
                                     std::to_string(c));

        Rng crng = rng.derive(0x4556414cull + static_cast<std::uint64_t>(c));  // "EVAL"+c
        const Sample& input = *reals[crng.below(reals.size())];

        // Equal-count real set: fake_count distinct rows via partial shuffle.
        std::vector<int> order(reals.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (int i = 0; i < fake_count; ++i) {
            const int j = i + static_cast<int>(crng.below(order.size() - i));
            std::swap(order[i], order[j]);
        }
        FeatureSet real_fs{Mat(fake_count, world.cfg.embed_dim), "real"};
        for (int i = 0; i < fake_count; ++i)
            set_row(real_fs.rows, i, perceptual_embed(world, reals[order[i]]->image));

        FeatureSet fake_fs{Mat(fake_count, world.cfg.embed_dim), "fake"};
        std::set<CodeSequence> distinct;
        for (int i = 0; i < fake_count; ++i) {
            const EditOutcome out = edit(input, crng);
            set_row(fake_fs.rows, i, perceptual_embed(world, out.image));
            distinct.insert(out.codes);
        }

        CategoryReport r;
        r.category = c;
        r.frechet = frechet_distance(real_fs, fake_fs);
        r.diversity = diversity_score(fake_fs);
        r.distinct_codes = static_cast<int>(distinct.size());
        reports.push_back(r);
    }
    return reports;
}

}  // namespace ledt
