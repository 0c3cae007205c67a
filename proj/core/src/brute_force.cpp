#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "simcal/bounds.hpp"

namespace simcal {
namespace {

constexpr long long kScanBudget = 2'000'000;
constexpr std::size_t kCandidates = 8;

using Point = std::vector<int>;  // 2s rows × m lattice units, each row sums to N

struct Lattice {
    const PosteriorModel& model;
    const QueryFunctional& functional;
    int s;
    int m;
    int N = 1;
    long long evaluations = 0;

    struct Score {
        double objective;
        double log_post;
    };

    Score score(const Point& x, double sign) {
        ++evaluations;
        Table p(s, m), pt(s, m);
        for (int j = 0; j < s; ++j) {
            for (int i = 0; i < m; ++i) {
                p(j, i) = static_cast<double>(x[static_cast<std::size_t>(j * m + i)]) / N;
                pt(j, i) = static_cast<double>(x[static_cast<std::size_t>((s + j) * m + i)]) / N;
            }
        }
        return {sign * functional.evaluate(p), model.log_posterior_pp(p, pt)};
    }
};

long long binomial(int n, int k) {
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

void compositions(int total, int parts, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        prefix.push_back(total);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int k = 0; k <= total; ++k) {
        prefix.push_back(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop_back();
    }
}

// (objective, log_post) lexicographic improvement among feasible points.
bool improves(const Lattice::Score& a, const Lattice::Score& b) {
    if (a.objective > b.objective + 1e-15) return true;
    return a.objective >= b.objective - 1e-15 && a.log_post > b.log_post;
}

// Every combination of "no move" or a single unit transfer in each row.
void for_each_neighbour(const Point& x, int rows, int m, const std::function<void(const Point&)>& visit) {
    std::vector<std::pair<int, int>> moves{{-1, -1}};
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            if (a != b) moves.emplace_back(a, b);

    std::vector<std::size_t> choice(static_cast<std::size_t>(rows), 0);
    Point y = x;
    while (true) {
        bool valid = true;
        bool moved = false;
        y = x;
        for (int r = 0; r < rows && valid; ++r) {
            const auto [from, to] = moves[choice[static_cast<std::size_t>(r)]];
            if (from < 0) continue;
            auto& src = y[static_cast<std::size_t>(r * m + from)];
            if (src == 0) {
                valid = false;
                break;
            }
            --src;
            ++y[static_cast<std::size_t>(r * m + to)];
            moved = true;
        }
        if (valid && moved) visit(y);

        int r = 0;
        while (r < rows && ++choice[static_cast<std::size_t>(r)] == moves.size()) choice[static_cast<std::size_t>(r++)] = 0;
        if (r == rows) break;
    }
}

}  // namespace

BruteForceResult brute_force_bound(const PosteriorModel& model, const QueryFunctional& functional,
                                   double log_c, Direction direction, double grid_step) {
    const int s = model.designs();
    const int m = model.outcomes();
    if (s * m > 6) throw std::invalid_argument("brute_force_bound is limited to s*m <= 6");
    if (!(grid_step > 0.0 && grid_step < 0.5)) throw std::invalid_argument("grid_step must lie in (0, 0.5)");
    if (functional.z.rows() != s || functional.z.cols() != m) {
        throw std::invalid_argument("functional shape does not match the model");
    }

    const double sign = direction == Direction::maximize ? 1.0 : -1.0;
    const int rows = 2 * s;
    const int n_final = static_cast<int>(std::ceil(1.0 / grid_step - 1e-9));
    auto scan_size = [&](int n) {
        const double per_row = static_cast<double>(binomial(n + m - 1, m - 1));
        return std::pow(per_row, rows);
    };

    // Coarsest lattice that fits the scan budget; the full lattice when it fits.
    int n0 = n_final;
    if (scan_size(n_final) > static_cast<double>(kScanBudget)) {
        n0 = m;
        while (scan_size(n0 + 1) <= static_cast<double>(kScanBudget)) ++n0;
    }

    Lattice lat{model, functional, s, m};
    lat.N = n0;

    std::vector<int> prefix;
    std::vector<std::vector<int>> row_points;
    compositions(n0, m, prefix, row_points);

    std::vector<std::pair<Lattice::Score, Point>> feasible;
    std::pair<Lattice::Score, Point> best_post{{-std::numeric_limits<double>::infinity(),
                                                -std::numeric_limits<double>::infinity()},
                                               {}};
    std::vector<std::size_t> idx(static_cast<std::size_t>(rows), 0);
    Point x(static_cast<std::size_t>(rows * m));
    while (true) {
        for (int r = 0; r < rows; ++r) {
            const auto& rp = row_points[idx[static_cast<std::size_t>(r)]];
            std::copy(rp.begin(), rp.end(), x.begin() + r * m);
        }
        const Lattice::Score sc = lat.score(x, sign);
        if (sc.log_post > best_post.first.log_post) best_post = {sc, x};
        if (sc.log_post >= log_c) {
            feasible.emplace_back(sc, x);
            if (feasible.size() > 4 * kCandidates) {
                std::partial_sort(feasible.begin(), feasible.begin() + kCandidates, feasible.end(),
                                  [](const auto& a, const auto& b) { return improves(a.first, b.first); });
                feasible.resize(kCandidates);
            }
        }
        int r = 0;
        while (r < rows && ++idx[static_cast<std::size_t>(r)] == row_points.size()) idx[static_cast<std::size_t>(r++)] = 0;
        if (r == rows) break;
    }
    std::sort(feasible.begin(), feasible.end(),
              [](const auto& a, const auto& b) { return improves(a.first, b.first); });
    if (feasible.size() > kCandidates) feasible.resize(kCandidates);

    std::vector<Point> candidates;
    for (const auto& f : feasible) candidates.push_back(f.second);
    const bool seeded_from_mode = candidates.empty();
    if (seeded_from_mode && !best_post.second.empty()) candidates.push_back(best_post.second);

    // Refine: halve the lattice step, then climb within the lattice.
    auto climb = [&](Point& pt, bool toward_level_set) {
        Lattice::Score cur = lat.score(pt, sign);
        bool moved = true;
        while (moved) {
            moved = false;
            Point best_y;
            Lattice::Score best_sc = cur;
            for_each_neighbour(pt, rows, m, [&](const Point& y) {
                const Lattice::Score sc = lat.score(y, sign);
                if (toward_level_set && cur.log_post < log_c) {
                    if (sc.log_post > best_sc.log_post) {
                        best_sc = sc;
                        best_y = y;
                    }
                } else if (sc.log_post >= log_c && improves(sc, best_sc)) {
                    best_sc = sc;
                    best_y = y;
                }
            });
            if (!best_y.empty()) {
                pt = std::move(best_y);
                cur = best_sc;
                moved = true;
            }
        }
        return cur;
    };

    BruteForceResult out;
    while (true) {
        for (Point& c : candidates) climb(c, seeded_from_mode);
        if (lat.N >= n_final) break;
        lat.N *= 2;
        for (Point& c : candidates)
            for (int& v : c) v *= 2;
    }

    double best = -std::numeric_limits<double>::infinity();
    for (const Point& c : candidates) {
        const Lattice::Score sc = lat.score(c, sign);
        if (sc.log_post >= log_c && sc.objective > best) {
            out.feasible = true;
            best = sc.objective;
            out.p.resize(s, m);
            out.p_tilde.resize(s, m);
            for (int j = 0; j < s; ++j) {
                for (int i = 0; i < m; ++i) {
                    out.p(j, i) = static_cast<double>(c[static_cast<std::size_t>(j * m + i)]) / lat.N;
                    out.p_tilde(j, i) = static_cast<double>(c[static_cast<std::size_t>((s + j) * m + i)]) / lat.N;
                }
            }
        }
    }
    out.value = out.feasible ? sign * best : std::numeric_limits<double>::quiet_NaN();
    out.evaluations = lat.evaluations;
    return out;
}

}  // namespace simcal
