#include "padiff/metrics.hpp"

#include "padiff/stats.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>

using nlohmann::json;

namespace padiff {

double psnr(const ImageF& a, const ImageF& b, double range) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("psnr: shape mismatch");
    if (range <= 0) throw std::invalid_argument("psnr: range must be positive");
    // subtract in double: float-precision differences cost ~1e-8 relative in dB
    double mse = (a.cast<double>() - b.cast<double>()).square().mean();
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(range * range / mse);
}

namespace {

// SSIM of one window pair with precomputed moments.
double ssim_value(double mu_a, double mu_b, double var_a, double var_b, double cov,
                  double range) {
    double c1 = (0.01 * range) * (0.01 * range);
    double c2 = (0.03 * range) * (0.03 * range);
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double ssim_window(const ImageF& a, const ImageF& b, int r0, int c0, int w, double range) {
    double n = static_cast<double>(w) * w;
    auto pa = a.block(r0, c0, w, w).cast<double>();
    auto pb = b.block(r0, c0, w, w).cast<double>();
    double mu_a = pa.mean();
    double mu_b = pb.mean();
    double var_a = pa.square().sum() / n - mu_a * mu_a;
    double var_b = pb.square().sum() / n - mu_b * mu_b;
    double cov = (pa * pb).sum() / n - mu_a * mu_b;
    return ssim_value(mu_a, mu_b, var_a, var_b, cov, range);
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b, int window, double range) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("ssim: shape mismatch");
    if (window < 1) throw std::invalid_argument("ssim: window must be >= 1");
    if (window > a.rows() || window > a.cols())
        throw std::invalid_argument("ssim: window larger than image");
    double sum = 0;
    long n = 0;
    for (int r = 0; r + window <= a.rows(); ++r)
        for (int c = 0; c + window <= a.cols(); ++c, ++n)
            sum += ssim_window(a, b, r, c, window, range);
    return sum / n;
}

std::vector<EvalRow> evaluate(const SamplerModels& models, const NoiseSchedule& schedule,
                              const std::vector<PairedSample>& samples,
                              const std::vector<EvalMethod>& methods, uint64_t seed,
                              std::vector<std::vector<ImageF>>* outputs) {
    if (methods.empty()) throw std::invalid_argument("evaluate: no methods given");
    std::vector<EvalRow> rows;
    if (outputs) outputs->assign(methods.size(), {});
    for (size_t mi = 0; mi < methods.size(); ++mi) {
        const EvalMethod& method = methods[mi];
        for (size_t si = 0; si < samples.size(); ++si) {
            SampleRequest req;
            req.sample = &samples[si];
            req.seed = splitmix64(seed ^ (0x65766c00ull + si));  // same across methods
            req.guidance = method.guidance;
            req.mode = method.mode;
            ImageF out = sample(models, schedule, req);

            EvalRow row;
            row.sample_id = static_cast<int>(si);
            row.method = method.name;
            row.w = method.guidance.w;
            row.use_confidence = method.guidance.use_confidence;
            row.psnr_db = psnr(out, samples[si].target);
            row.ssim = ssim(out, samples[si].target);
            rows.push_back(row);
            if (outputs) (*outputs)[mi].push_back(std::move(out));
        }
    }
    return rows;
}

std::vector<MethodAggregate> aggregate(const std::vector<EvalRow>& rows) {
    std::vector<MethodAggregate> out;
    for (const EvalRow& row : rows) {
        MethodAggregate* agg = nullptr;
        for (MethodAggregate& a : out)
            if (a.method == row.method) agg = &a;
        if (!agg) {
            out.push_back({row.method, 0, 0, 0});
            agg = &out.back();
        }
        agg->mean_psnr_db += row.psnr_db;
        agg->mean_ssim += row.ssim;
        ++agg->n;
    }
    for (MethodAggregate& a : out) {
        a.mean_psnr_db /= a.n;
        a.mean_ssim /= a.n;
    }
    return out;
}

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_report_csv: cannot open " + path);
    f << "sample_id,method,w,use_confidence,psnr_db,ssim\n";
    for (const EvalRow& r : rows)
        f << r.sample_id << "," << r.method << "," << r.w << ","
          << (r.use_confidence ? 1 : 0) << "," << r.psnr_db << "," << r.ssim << "\n";
}

void write_aggregates_json(const std::string& path,
                           const std::vector<MethodAggregate>& aggregates,
                           uint64_t seed) {
    json j;
    j["seed"] = seed;
    for (const MethodAggregate& a : aggregates) {
        j["methods"][a.method]["mean_psnr_db"] = a.mean_psnr_db;
        j["methods"][a.method]["mean_ssim"] = a.mean_ssim;
        j["methods"][a.method]["n"] = a.n;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_aggregates_json: cannot open " + path);
    f << j.dump(2) << "\n";
}

CorrelationResult correlate_confidence(const std::vector<ImageF>& restored,
                                       const std::vector<ImageF>& targets,
                                       const std::vector<ImageF>& confidences,
                                       int window, int n_bins, int windows_per_sample,
                                       uint64_t seed) {
    if (restored.size() != targets.size() || restored.size() != confidences.size() ||
        restored.empty())
        throw std::invalid_argument("correlate_confidence: input count mismatch");
    if (n_bins < 2) throw std::invalid_argument("correlate_confidence: need >= 2 bins");

    // confidence values live in [0.2, 1]; bin over that range
    const double lo = 0.2, hi = 1.0;
    CorrelationResult result;
    result.bins.resize(static_cast<size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        result.bins[b].lo = lo + (hi - lo) * b / n_bins;
        result.bins[b].hi = lo + (hi - lo) * (b + 1) / n_bins;
    }

    Rng rng = Rng::with_stream(seed, 0x636f7272ull);
    for (size_t si = 0; si < restored.size(); ++si) {
        const ImageF& target = targets[si];
        const ImageF& conf_map = confidences[si];
        const ImageF& out = restored[si];
        if (window > target.rows() || window > target.cols())
            throw std::invalid_argument("correlate_confidence: window larger than image");

        for (int k = 0; k < windows_per_sample; ++k) {
            int r = rng.uniform_int(0, static_cast<int>(target.rows()) - window);
            int c = rng.uniform_int(0, static_cast<int>(target.cols()) - window);
            double conf = conf_map.block(r, c, window, window).cast<double>().mean();
            double local = ssim_window(out, target, r, c, window, 1.0);
            int b = std::min(n_bins - 1,
                             std::max(0, static_cast<int>((conf - lo) / (hi - lo) * n_bins)));
            result.bins[b].mean_ssim += local;
            ++result.bins[b].n_windows;
        }
    }

    std::vector<double> xs, ys;
    for (CorrelationBin& b : result.bins) {
        if (b.n_windows == 0) continue;  // reported as a gap, not an error
        b.mean_ssim /= b.n_windows;
        xs.push_back((b.lo + b.hi) / 2);
        ys.push_back(b.mean_ssim);
    }
    result.populated_bins = static_cast<int>(xs.size());
    if (xs.size() >= 2) {
        try {
            result.spearman = spearman(xs, ys);
            result.spearman_defined = true;
        } catch (const std::invalid_argument&) {
            // constant bin means: correlation undefined, left flagged
        }
    }
    return result;
}

void write_correlation_csv(const std::string& path, const CorrelationResult& result) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_correlation_csv: cannot open " + path);
    f << "bin_lo,bin_hi,mean_ssim,n_windows\n";
    for (const CorrelationBin& b : result.bins)
        f << b.lo << "," << b.hi << "," << b.mean_ssim << "," << b.n_windows << "\n";
}

}  // namespace padiff
