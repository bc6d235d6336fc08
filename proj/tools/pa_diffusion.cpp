// pa_diffusion: synthetic-data generation, diffusion-model training,
// quality-guided sampling, and evaluation, from one binary.

#include "padiff/checkpoint.hpp"
#include "padiff/metrics.hpp"
#include "padiff/npz.hpp"
#include "padiff/phantom.hpp"
#include "padiff/png.hpp"
#include "padiff/sampler.hpp"
#include "padiff/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace padiff;

namespace {

struct GlobalOpts {
    std::string config_path;
    uint64_t seed = 0;
    std::string out_dir;
    std::string device = "cpu";
    json config = json::object();
};

void finalize_globals(GlobalOpts& g) {
    if (g.device != "cpu")
        throw unsupported_error("device '" + g.device + "' not supported; use cpu");
    if (!g.config_path.empty()) {
        std::ifstream f(g.config_path);
        if (!f) throw not_found_error("config file not found: " + g.config_path);
        g.config = json::parse(f);
    }
    if (g.out_dir.empty()) {
        if (const char* env = std::getenv("PA_DIFFUSION_OUT")) g.out_dir = env;
        if (g.out_dir.empty() && g.config.contains("out")) g.out_dir = g.config["out"];
        if (g.out_dir.empty()) g.out_dir = "out";
    }
    if (g.config.contains("seed") && g.seed == 0) g.seed = g.config["seed"].get<uint64_t>();
    fs::create_directories(g.out_dir);
}

// config-file fallback for values the user did not pass on the command line
template <class T>
void from_config(const json& cfg, const std::string& key, const CLI::Option* opt, T& value) {
    if (opt->count() == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

NoisePredictor<float> load_model(const std::string& path, CheckpointInfo* info) {
    if (!fs::exists(path)) throw not_found_error("checkpoint not found: " + path);
    return load_checkpoint(path, info);
}

std::vector<PairedSample> load_split_checked(const std::string& data, const std::string& split) {
    if (!fs::exists(data)) throw not_found_error("dataset not found: " + data);
    return load_split(data, split);
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw std::invalid_argument("empty list: " + csv);
    return out;
}

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) {
                std::vector<double> v;
                for (const auto& r : rows) v.push_back(r[i]);
                return v;
            }
        throw not_found_error("csv column not found: " + name);
    }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw not_found_error("csv not found: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    std::stringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) t.columns.push_back(tok);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream rs(line);
        std::vector<double> row;
        while (std::getline(rs, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        t.rows.push_back(row);
    }
    return t;
}

GuidanceConfig guidance_from(double w, int t_guide, bool no_confidence, bool normalize) {
    GuidanceConfig g;
    g.w = w;
    g.t_guide = t_guide;
    g.use_confidence = !no_confidence;
    g.normalize_weights = normalize;
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Guided-diffusion restoration of multi-shot photoacoustic images"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--out", g.out_dir, "output directory (default $PA_DIFFUSION_OUT or ./out)");
    app.add_option("--device", g.device, "compute device (cpu only)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a paired phantom dataset");
    DatasetConfig dc;
    auto* o_ntr = gen->add_option("--n-train", dc.n_train, "training samples");
    auto* o_nva = gen->add_option("--n-val", dc.n_val, "validation samples");
    auto* o_nte = gen->add_option("--n-test", dc.n_test, "test samples");
    auto* o_size = gen->add_option("--size", dc.image_size, "image side in pixels");
    auto* o_shots = gen->add_option("--shots", dc.n_shots, "shots per sample (M)");
    auto* o_hq = gen->add_option("--hq-shots", dc.n_hq_shots, "shots averaged into the target");
    auto* o_noise = gen->add_option("--noise", dc.noise_level, "additive noise level");

    // train
    auto* tr = app.add_subcommand("train", "train a noise predictor");
    TrainConfig tc;
    auto* o_data_tr = tr->add_option("--data", tc.dataset_path, "dataset root")->required();
    auto* o_mode_tr = tr->add_option("--mode", tc.condition_mode, "single or multi");
    auto* o_iters = tr->add_option("--iters", tc.iterations, "training iterations");
    auto* o_batch = tr->add_option("--batch", tc.batch_size, "batch size");
    auto* o_lr = tr->add_option("--lr", tc.learning_rate, "Adam learning rate");
    auto* o_drop = tr->add_option("--dropout", tc.condition_dropout_prob,
                                  "condition dropout probability");
    auto* o_ci = tr->add_option("--ckpt-interval", tc.checkpoint_interval,
                                "checkpoint every N steps (0: final only)");
    auto* o_name = tr->add_option("--name", tc.model_name, "checkpoint base name");
    auto* o_width = tr->add_option("--width", tc.base_width, "base channel width");
    std::string loss_name = "l2";
    auto* o_loss = tr->add_option("--loss", loss_name, "l2 or l1");

    // shared sampling/eval options
    std::string data_path, split = "test", single_ckpt, multi_ckpt, mode_name = "guided";
    double w = 0;
    int t_guide = 0, index = 0;
    bool no_confidence = false, normalize = false, trace = false;

    auto* sa = app.add_subcommand("sample", "restore one sample");
    sa->add_option("--data", data_path, "dataset root")->required();
    sa->add_option("--split", split, "train/val/test");
    sa->add_option("--index", index, "sample index within the split");
    sa->add_option("--mode", mode_name, "baseline/ddpm_single/ddpm_multi/guided/cfg");
    sa->add_option("--single-ckpt", single_ckpt, "single-shot model checkpoint");
    sa->add_option("--multi-ckpt", multi_ckpt, "multi-shot model checkpoint");
    sa->add_option("-w,--guidance", w, "guidance scale");
    sa->add_option("--t-guide", t_guide, "guidance cutoff timestep");
    sa->add_flag("--no-confidence", no_confidence, "unweighted noise mix");
    sa->add_flag("--normalize-weights", normalize, "divide mix by the confidence sum");
    sa->add_flag("--trace", trace, "save every intermediate reverse step");

    auto* ev = app.add_subcommand("evaluate", "run methods over a split, write report.csv");
    std::string methods_csv = "baseline,ddpm_single,ddpm_multi,guided";
    ev->add_option("--data", data_path, "dataset root")->required();
    ev->add_option("--split", split, "train/val/test");
    ev->add_option("--methods", methods_csv, "comma-separated method list");
    ev->add_option("--single-ckpt", single_ckpt, "single-shot model checkpoint");
    ev->add_option("--multi-ckpt", multi_ckpt, "multi-shot model checkpoint");
    ev->add_option("-w,--guidance", w, "guidance scale for guided/cfg");
    ev->add_option("--t-guide", t_guide, "guidance cutoff timestep");
    ev->add_flag("--no-confidence", no_confidence, "unweighted noise mix");
    ev->add_flag("--normalize-weights", normalize, "divide mix by the confidence sum");

    auto* co = app.add_subcommand("correlate",
                                  "confidence vs local quality, write correlation.csv");
    int corr_window = 7, corr_bins = 20, corr_per_sample = 200;
    co->add_option("--data", data_path, "dataset root")->required();
    co->add_option("--split", split, "train/val/test");
    auto* o_corr_mode = co->add_option(
        "--mode", mode_name, "sampling method to study (default ddpm_single)");
    co->add_option("--single-ckpt", single_ckpt, "single-shot model checkpoint");
    co->add_option("--multi-ckpt", multi_ckpt, "multi-shot model checkpoint");
    co->add_option("-w,--guidance", w, "guidance scale");
    co->add_option("--t-guide", t_guide, "guidance cutoff timestep");
    co->add_option("--window", corr_window, "local window side in pixels");
    co->add_option("--bins", corr_bins, "confidence bins");
    co->add_option("--windows-per-sample", corr_per_sample, "random windows per sample");

    auto* sw = app.add_subcommand(
        "sweep", "guided sampling over a grid of w and t_guide, with and without h");
    std::string w_list_csv = "0,1,2,5,10,20,30";
    std::string t_guide_list_csv = "0";
    sw->add_option("--data", data_path, "dataset root")->required();
    sw->add_option("--split", split, "train/val/test");
    sw->add_option("--w-list", w_list_csv, "comma-separated guidance scales");
    sw->add_option("--t-guide-list", t_guide_list_csv, "comma-separated guidance cutoffs");
    sw->add_option("--single-ckpt", single_ckpt, "single-shot model checkpoint");
    sw->add_option("--multi-ckpt", multi_ckpt, "multi-shot model checkpoint");
    sw->add_flag("--normalize-weights", normalize, "divide mix by the confidence sum");

    auto* pl = app.add_subcommand("plot", "render columns of a csv as a line chart");
    std::string plot_input, plot_x = "step", plot_y = "loss", plot_out = "plot.png";
    pl->add_option("--input", plot_input, "csv file")->required();
    pl->add_option("--x", plot_x, "x column name");
    pl->add_option("--y", plot_y, "comma-separated y column names");
    pl->add_option("--output", plot_out, "output png (relative to --out)");

    CLI11_PARSE(app, argc, argv);

    try {
        finalize_globals(g);
        const json& cfg = g.config;

        if (gen->parsed()) {
            from_config(cfg, "n_train", o_ntr, dc.n_train);
            from_config(cfg, "n_val", o_nva, dc.n_val);
            from_config(cfg, "n_test", o_nte, dc.n_test);
            from_config(cfg, "image_size", o_size, dc.image_size);
            from_config(cfg, "n_shots", o_shots, dc.n_shots);
            from_config(cfg, "n_hq_shots", o_hq, dc.n_hq_shots);
            from_config(cfg, "noise_level", o_noise, dc.noise_level);
            build_dataset(g.out_dir, dc, g.seed);
            std::cout << "dataset written to " << g.out_dir << "\n";
            return 0;
        }

        if (tr->parsed()) {
            from_config(cfg, "dataset_path", o_data_tr, tc.dataset_path);
            from_config(cfg, "condition_mode", o_mode_tr, tc.condition_mode);
            from_config(cfg, "iterations", o_iters, tc.iterations);
            from_config(cfg, "batch_size", o_batch, tc.batch_size);
            from_config(cfg, "learning_rate", o_lr, tc.learning_rate);
            from_config(cfg, "condition_dropout_prob", o_drop, tc.condition_dropout_prob);
            from_config(cfg, "checkpoint_interval", o_ci, tc.checkpoint_interval);
            from_config(cfg, "model_name", o_name, tc.model_name);
            from_config(cfg, "base_width", o_width, tc.base_width);
            from_config(cfg, "loss", o_loss, loss_name);
            if (loss_name != "l2" && loss_name != "l1")
                throw std::invalid_argument("--loss must be l2 or l1");
            tc.loss_norm = loss_name == "l1" ? LossNorm::l1 : LossNorm::squared_l2;
            tc.seed = g.seed;
            tc.out_dir = g.out_dir;
            TrainResult r = train(tc);
            std::cout << "checkpoint: " << r.checkpoint_path << "\n"
                      << "loss (first 10% mean): " << r.first_window_loss << "\n"
                      << "loss (last 10% mean):  " << r.last_window_loss << "\n";
            return 0;
        }

        // remaining commands share models + data
        SamplerModels models;
        NoisePredictor<float> single_model, multi_model;
        CheckpointInfo info;
        int T = 1000;
        double beta_1 = 1e-4, beta_T = 0.02;
        auto load_models = [&]() {
            std::string missing;
            for (const std::string& p : {single_ckpt, multi_ckpt})
                if (!p.empty() && !fs::exists(p)) missing += (missing.empty() ? "" : ", ") + p;
            if (!missing.empty())
                throw not_found_error("checkpoint(s) not found: " + missing);
            if (!single_ckpt.empty()) {
                single_model = load_model(single_ckpt, &info);
                models.single_model = &single_model;
                T = info.T; beta_1 = info.beta_1; beta_T = info.beta_T;
            }
            if (!multi_ckpt.empty()) {
                multi_model = load_model(multi_ckpt, &info);
                models.multi_model = &multi_model;
                T = info.T; beta_1 = info.beta_1; beta_T = info.beta_T;
            }
        };

        if (sa->parsed()) {
            load_models();
            NoiseSchedule schedule = linear_schedule(T, beta_1, beta_T);
            std::vector<PairedSample> samples = load_split_checked(data_path, split);
            if (index < 0 || index >= static_cast<int>(samples.size()))
                throw std::invalid_argument("--index out of range for split " + split);
            SampleRequest req;
            req.sample = &samples[static_cast<size_t>(index)];
            req.seed = splitmix64(g.seed ^ (0x65766c00ull + static_cast<uint64_t>(index)));
            req.guidance = guidance_from(w, t_guide, no_confidence, normalize);
            req.mode = parse_sample_mode(mode_name);
            std::vector<ImageF> steps;
            ImageF out = sample(models, schedule, req, trace ? &steps : nullptr);

            std::string stem = mode_name + "_" + split + "_" + std::to_string(index);
            write_png_gray((fs::path(g.out_dir) / (stem + ".png")).string(), out);
            {
                NpzWriter npz((fs::path(g.out_dir) / (stem + ".npz")).string());
                size_t h = static_cast<size_t>(out.rows()), wd = static_cast<size_t>(out.cols());
                npz.add_array("restored", {h, wd}, out.data());
                npz.add_array("target", {h, wd}, req.sample->target.data());
                if (trace)
                    for (size_t i = 0; i < steps.size(); ++i)
                        npz.add_array("step_" + std::to_string(i), {h, wd}, steps[i].data());
            }
            std::cout << "psnr_db: " << psnr(out, req.sample->target) << "\n"
                      << "ssim: " << ssim(out, req.sample->target) << "\n"
                      << "wrote " << stem << ".png / .npz in " << g.out_dir << "\n";
            return 0;
        }

        if (ev->parsed()) {
            load_models();
            NoiseSchedule schedule = linear_schedule(T, beta_1, beta_T);
            std::vector<PairedSample> samples = load_split_checked(data_path, split);
            std::vector<EvalMethod> methods;
            std::stringstream ss(methods_csv);
            std::string name;
            while (std::getline(ss, name, ',')) {
                EvalMethod m;
                m.name = name;
                m.mode = parse_sample_mode(name);
                if (m.mode == SampleMode::guided || m.mode == SampleMode::cfg)
                    m.guidance = guidance_from(w, t_guide, no_confidence, normalize);
                methods.push_back(m);
            }
            std::vector<EvalRow> rows = evaluate(models, schedule, samples, methods, g.seed);
            write_report_csv((fs::path(g.out_dir) / "report.csv").string(), rows);
            std::vector<MethodAggregate> aggs = aggregate(rows);
            write_aggregates_json((fs::path(g.out_dir) / "aggregates.json").string(), aggs,
                                  g.seed);
            for (const MethodAggregate& a : aggs)
                std::cout << a.method << ": psnr_db " << a.mean_psnr_db << ", ssim "
                          << a.mean_ssim << " (n=" << a.n << ")\n";
            return 0;
        }

        if (co->parsed()) {
            if (o_corr_mode->count() == 0) mode_name = "ddpm_single";
            load_models();
            NoiseSchedule schedule = linear_schedule(T, beta_1, beta_T);
            std::vector<PairedSample> samples = load_split_checked(data_path, split);
            EvalMethod m;
            m.name = mode_name;
            m.mode = parse_sample_mode(mode_name);
            m.guidance = guidance_from(w, t_guide, no_confidence, normalize);
            std::vector<std::vector<ImageF>> outputs;
            evaluate(models, schedule, samples, {m}, g.seed, &outputs);
            std::vector<ImageF> targets, confs;
            for (const PairedSample& s : samples) {
                targets.push_back(s.target);
                if (m.mode == SampleMode::ddpm_single) {
                    confs.push_back(most_reliable_shot(s).confidence.values);
                } else {
                    ImageF mean_conf = ImageF::Zero(s.target.rows(), s.target.cols());
                    for (const ShotImage& shot : s.shots)
                        mean_conf += shot.confidence.values;
                    confs.push_back(mean_conf / static_cast<float>(s.shots.size()));
                }
            }
            CorrelationResult r =
                correlate_confidence(outputs[0], targets, confs, corr_window, corr_bins,
                                     corr_per_sample, g.seed);
            write_correlation_csv((fs::path(g.out_dir) / "correlation.csv").string(), r);
            if (r.spearman_defined)
                std::cout << "spearman: " << r.spearman << " over " << r.populated_bins
                          << " populated bins\n";
            else
                std::cout << "spearman: undefined (" << r.populated_bins
                          << " populated bins)\n";
            std::cout << "wrote correlation.csv in " << g.out_dir << "\n";
            return 0;
        }

        if (sw->parsed()) {
            load_models();
            NoiseSchedule schedule = linear_schedule(T, beta_1, beta_T);
            std::vector<PairedSample> samples = load_split_checked(data_path, split);
            std::vector<double> ws = parse_list(w_list_csv);
            std::vector<double> tgs = parse_list(t_guide_list_csv);
            std::ofstream f(fs::path(g.out_dir) / "sweep.csv");
            f << "w,t_guide,use_confidence,mean_psnr_db,mean_ssim\n";
            double best_w = ws[0], best_ssim = -2;
            int best_tg = 0;
            bool best_h = true;
            for (double tg : tgs)
                for (double wv : ws)
                    for (bool with_h : {true, false}) {
                        EvalMethod m;
                        m.name = "guided";
                        m.mode = SampleMode::guided;
                        m.guidance = guidance_from(wv, static_cast<int>(tg), !with_h,
                                                   normalize);
                        MethodAggregate a =
                            aggregate(evaluate(models, schedule, samples, {m}, g.seed))[0];
                        f << wv << "," << tg << "," << (with_h ? 1 : 0) << ","
                          << a.mean_psnr_db << "," << a.mean_ssim << "\n";
                        std::cout << "w=" << wv << " t_guide=" << tg << " h="
                                  << (with_h ? "on" : "off") << ": psnr_db "
                                  << a.mean_psnr_db << ", ssim " << a.mean_ssim << "\n";
                        if (a.mean_ssim > best_ssim) {
                            best_ssim = a.mean_ssim;
                            best_w = wv;
                            best_tg = static_cast<int>(tg);
                            best_h = with_h;
                        }
                    }
            std::cout << "best: w=" << best_w << " t_guide=" << best_tg << " h="
                      << (best_h ? "on" : "off") << " (ssim " << best_ssim << ")\n";
            return 0;
        }

        if (pl->parsed()) {
            CsvTable t = read_csv(plot_input);
            std::vector<ChartSeries> series;
            std::stringstream ys(plot_y);
            std::string ycol;
            while (std::getline(ys, ycol, ','))
                series.push_back({ycol, t.column(plot_x), t.column(ycol)});
            ImageF chart = render_line_chart(series);
            std::string out_path = (fs::path(g.out_dir) / plot_out).string();
            write_png_gray(out_path, chart);
            std::cout << "wrote " << out_path << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
