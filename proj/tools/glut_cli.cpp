// glut: fit, apply, bake, edit, evaluate, benchmark and serve Gaussian LUT models.
//
// Exit codes: 0 success, 2 bad arguments, 3 malformed input, 4 file IO, 5 training diverged,
// 6 unsupported request for this model kind or invalid values, 7 degenerate edit.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glut/glut.hpp"

namespace {

using namespace glut;

constexpr int kExitArgs = 2;
constexpr int kExitParse = 3;
constexpr int kExitIo = 4;
constexpr int kExitDiverged = 5;
constexpr int kExitInvalid = 6;
constexpr int kExitDegenerate = 7;

/// Flags valid in general but not for this model kind, or values out of range.
class InvalidRequest : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

Rgb parse_color(const std::string& s) {
    if (!s.empty() && s[0] == '#') {
        if (s.size() != 7) throw InvalidRequest("hex colors take the form #rrggbb: '" + s + "'");
        Rgb c;
        for (int k = 0; k < 3; ++k) {
            const std::string byte = s.substr(1 + 2 * k, 2);
            std::size_t used = 0;
            int v = -1;
            try {
                v = std::stoi(byte, &used, 16);
            } catch (const std::exception&) {
            }
            if (used != 2 || v < 0) throw InvalidRequest("bad hex color '" + s + "'");
            c[k] = v / 255.0;
        }
        return c;
    }
    Rgb c;
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
        const std::size_t comma = s.find(',', pos);
        if ((k < 2) != (comma != std::string::npos)) throw InvalidRequest("colors are #rrggbb or r,g,b: '" + s + "'");
        const std::string part = s.substr(pos, k < 2 ? comma - pos : std::string::npos);
        std::size_t used = 0;
        try {
            c[k] = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size()) throw InvalidRequest("bad color component '" + part + "' in '" + s + "'");
        pos = comma + 1;
    }
    return c;
}

std::string color_text(const Vec3& v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f", v[0], v[1], v[2]);
    return buf;
}

/// --style / --blend selection shared by apply, bake, edit, eval and bench.
struct StyleChoice {
    std::optional<std::size_t> style;
    std::vector<std::size_t> blend;
    std::optional<double> alpha;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--style", style, "Style index of a conditional model");
        auto* b = cmd->add_option("--blend", blend, "Blend two styles of a conditional model")->expected(2);
        cmd->add_option("--alpha", alpha, "Blend weight toward the second style, in [0,1]")->needs(b);
        b->excludes(cmd->get_option("--style"));
    }
};

struct LoadedModel {
    std::vector<std::uint8_t> bytes;
    std::optional<GlutModel> glut;
    std::optional<CglutModel> cglut;
};

LoadedModel load_model(const std::string& path) {
    LoadedModel m;
    m.bytes = read_file_bytes(path);
    if (peek_model_kind(m.bytes) == ModelKind::Glut) m.glut = deserialize_glut(m.bytes);
    else m.cglut = deserialize_cglut(m.bytes);
    return m;
}

GlutModel select_model(const LoadedModel& m, const StyleChoice& c) {
    const bool wants_style = c.style.has_value() || !c.blend.empty();
    if (m.glut) {
        if (wants_style) throw InvalidRequest("--style and --blend need a conditional (multi-style) model");
        return *m.glut;
    }
    if (!wants_style)
        throw InvalidRequest("conditional model with " + std::to_string(m.cglut->styles()) + " styles: pass --style L or --blend L1 L2 --alpha A");
    auto check = [&](std::size_t l) {
        if (l >= m.cglut->styles())
            throw InvalidRequest("style " + std::to_string(l) + " out of range (" + std::to_string(m.cglut->styles()) + " styles)");
    };
    if (c.style) {
        check(*c.style);
        return m.cglut->materialize(*c.style);
    }
    check(c.blend[0]);
    check(c.blend[1]);
    if (!c.alpha) throw InvalidRequest("--blend needs --alpha");
    if (!(*c.alpha >= 0.0 && *c.alpha <= 1.0)) throw InvalidRequest("--alpha must lie in [0,1]");
    return m.cglut->blend(c.blend[0], c.blend[1], *c.alpha);
}

/// Pixel pairs from two aligned images; every 16th pixel (index % 16 == 15) is held out.
FitData pairs_from_images(const std::string& in_path, const std::string& out_path) {
    const Image in = read_image(in_path);
    const Image out = read_image(out_path);
    if (in.width != out.width || in.height != out.height)
        throw InvalidRequest("pair images differ in size: " + std::to_string(in.width) + "x" + std::to_string(in.height) + " vs " +
                             std::to_string(out.width) + "x" + std::to_string(out.height));
    FitData d;
    for (std::size_t i = 0; i < in.pixels.size(); ++i) {
        auto& set = i % 16 == 15 ? d.holdout : d.train;
        set.inputs.push_back(in.pixels[i]);
        set.targets.push_back(out.pixels[i]);
    }
    if (d.holdout.size() == 0) throw InvalidRequest("pair images are too small to hold out any pixels");
    return d;
}

struct FitArgs {
    std::vector<std::string> cubes;
    std::vector<std::string> pairs;
    std::size_t gaussians = 32;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double lambda_hc = 10.0;
    double lambda_sparse = 0.001;
    int train_q = 128;
    std::size_t holdout = 65536;
    int threads = 0;
    std::string conditional;
    std::size_t hidden = 64;
    std::size_t embedding_dim = 64;
    std::string out;
    std::string log;
};

int run_fit(const FitArgs& a) {
    if (a.cubes.empty() == a.pairs.empty()) throw InvalidRequest("pass either --cube or --pairs");
    const bool conditional = !a.conditional.empty() || a.cubes.size() > 1;
    if (conditional && a.cubes.empty()) throw InvalidRequest("conditional fitting takes --cube inputs");
    const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write '" + log_path + "'");

    TrainConfig tc;
    tc.seed = a.seed;
    tc.base_lr = a.lr;
    tc.lambda_hc = a.lambda_hc;
    tc.lambda_sparse = a.lambda_sparse;
    tc.train_q = a.train_q;
    tc.holdout_count = a.holdout;
    tc.threads = a.threads;

    if (conditional) {
        std::vector<CubeLut> luts;
        for (const auto& p : a.cubes) luts.push_back(read_cube_file(p));
        CglutConfig cc;
        cc.train = tc;
        cc.train.epochs = a.epochs.value_or(40);
        cc.train.batch_size = a.batch.value_or(8192);
        cc.hidden = a.hidden;
        cc.embedding_dim = a.embedding_dim;
        cc.mode = a.conditional == "shared" ? CglutMode::SharedGeometry : CglutMode::FullGeneration;
        const auto [train, holdout] = make_styled_data(luts, cc.train.train_q, cc.train.holdout_count);
        auto res = fit_cglut(train, holdout, a.gaussians, cc, [&](const CglutEpochRecord& r) {
            log << r.to_json() << "\n" << std::flush;
            std::fprintf(stderr, "epoch %d  loss %.6g  mean psnr %.3f dB\n", r.epoch, r.train_loss, r.mean_psnr());
        });
        write_file_bytes(a.out, serialize(res.model));
        std::cout << res.log.back().to_json() << "\n";
        return 0;
    }

    tc.epochs = a.epochs.value_or(20);
    tc.batch_size = a.batch.value_or(1024);
    auto on_epoch = [&](const EpochRecord& r) {
        log << r.to_json() << "\n" << std::flush;
        std::fprintf(stderr, "epoch %d  loss %.6g  psnr %.3f dB  dE00 %.4f\n", r.epoch, r.train_loss, r.holdout_psnr, r.holdout_de00);
    };
    FitResult res;
    if (!a.cubes.empty()) {
        res = fit_glut(read_cube_file(a.cubes[0]), a.gaussians, tc, on_epoch);
    } else {
        const FitData d = pairs_from_images(a.pairs[0], a.pairs[1]);
        res = fit_glut(d.train, d.holdout, a.gaussians, tc, on_epoch);
    }
    write_file_bytes(a.out, serialize(res.model));
    std::cout << res.log.back().to_json() << "\n";
    return 0;
}

struct ApplyArgs {
    std::string model;
    StyleChoice choice;
    double keep_fraction = 1.0;
    int threads = 0;
    int bit_depth = 8;
    std::string in, out;
};

int run_apply(const ApplyArgs& a) {
    const GlutModel m = select_model(load_model(a.model), a.choice);
    const Image img = read_image(a.in);
    write_image(a.out, apply_to_image(m, img, ApplyOptions{a.threads, a.keep_fraction}), a.bit_depth);
    return 0;
}

struct BakeArgs {
    std::string model;
    StyleChoice choice;
    int size = 33;
    int threads = 0;
    std::string title;
    std::string out;
};

int run_bake(const BakeArgs& a) {
    CubeLut lut = bake_to_cube(select_model(load_model(a.model), a.choice), a.size, a.threads);
    lut.title = a.title;
    write_cube_file(a.out, lut);
    return 0;
}

struct EditArgs {
    std::string model;
    std::optional<std::size_t> style;
    std::string cin, cout;
    std::size_t k = 1;
    double strength = 1.0;
    std::string out;
    bool json = false;
};

int run_edit(const EditArgs& a) {
    const LoadedModel loaded = load_model(a.model);
    StyleChoice choice;
    choice.style = a.style;
    GlutModel m = select_model(loaded, choice);
    EditConstraint c{parse_color(a.cin), parse_color(a.cout), a.k, a.strength};
    EditRecord rec = apply_edit(m, c);  // also validates at s = 0
    if (a.strength == 0.0 && loaded.glut) write_file_bytes(a.out, loaded.bytes);
    else write_file_bytes(a.out, serialize(m));
    if (a.json) {
        std::cout << rec.to_json().dump() << "\n";
    } else {
        std::cout << "residual_before " << color_text(rec.residual_before) << "\n"
                  << "residual_after  " << color_text(rec.residual_after) << "\n"
                  << "m " << fmt(rec.movement, 6) << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string model;
    StyleChoice choice;
    std::string cube;
    std::vector<std::string> pairs;
    int train_q = 128;
    std::size_t holdout = 65536;
    double keep_fraction = 1.0;
    int threads = 0;
    bool json = false;
};

int run_eval(const EvalArgs& a) {
    if (a.cube.empty() == a.pairs.empty()) throw InvalidRequest("pass either --cube or --pairs");
    const GlutModel m = select_model(load_model(a.model), a.choice);
    ColorPairSet data;
    if (!a.cube.empty()) {
        const LatticeSplit split(a.train_q);
        data = densify(read_cube_file(a.cube), split.sample_test(a.holdout, kHoldoutSeed));
    } else {
        data = pairs_from_images(a.pairs[0], a.pairs[1]).holdout;
    }
    EvalReport r;
    if (a.keep_fraction < 1.0) {
        std::vector<Rgb> pred(data.size());
        apply_to_colors(PreparedGlut(m), data.inputs, pred, ApplyOptions{a.threads, a.keep_fraction});
        r = compare_colors(pred, data.targets, a.threads > 0 ? a.threads : default_threads());
    } else {
        r = evaluate_pairs(m, data, a.threads);
    }
    if (a.json) {
        auto j = to_json(r);
        j["keep_fraction"] = a.keep_fraction;
        j["ops_per_pixel"] = ops_per_pixel(m, std::span<const Rgb>(data.inputs).first(std::min<std::size_t>(data.size(), 4096)), a.keep_fraction);
        std::cout << j.dump() << "\n";
    } else {
        std::cout << format_table({"metric", "value"}, {{"psnr_db", fmt(r.psnr, 6)},
                                                        {"delta_e00", fmt(r.delta_e00, 6)},
                                                        {"delta_e76", fmt(r.delta_e76, 6)},
                                                        {"samples", std::to_string(r.sample_count)}});
    }
    return 0;
}

struct BenchArgs {
    std::string model;
    StyleChoice choice;
    std::vector<std::string> sizes{"512x512", "1280x720", "3840x2160"};
    std::vector<double> keep{1.0};
    int threads = 0;
    int runs = 20;
    int warmups = 3;
    bool json = false;
};

std::pair<int, int> parse_size(const std::string& s) {
    const auto x = s.find('x');
    int w = 0, h = 0;
    try {
        if (x != std::string::npos) {
            w = std::stoi(s.substr(0, x));
            h = std::stoi(s.substr(x + 1));
        }
    } catch (const std::exception&) {
    }
    if (w <= 0 || h <= 0) throw InvalidRequest("sizes take the form WxH: '" + s + "'");
    return {w, h};
}

int run_bench(const BenchArgs& a) {
    const GlutModel m = select_model(load_model(a.model), a.choice);
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::vector<std::string>> table;
    const auto probe = noise_image(64, 64).pixels;
    for (const auto& s : a.sizes) {
        const auto [w, h] = parse_size(s);
        for (double keep : a.keep) {
            if (!(keep > 0.0 && keep <= 1.0)) throw InvalidRequest("--keep-fraction must lie in (0,1]");
            const BenchReport r = throughput_bench(m, w, h, a.threads, keep, a.runs, a.warmups);
            const double ops = ops_per_pixel(m, probe, keep);
            auto j = r.to_json();
            j["ops_per_pixel"] = ops;
            rows.push_back(j);
            table.push_back({r.label, fmt(keep, 2), fmt(r.ms_per_frame, 3), fmt(r.fps, 1), fmt(ops, 0)});
        }
    }
    if (a.json) std::cout << nlohmann::json{{"primitives", m.size()}, {"results", rows}}.dump() << "\n";
    else std::cout << format_table({"resolution", "keep", "ms/frame", "fps", "ops/pixel"}, table);
    return 0;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors_origin = ServiceOptions{}.cors_origin;
    std::string journal_dir;
    int preview_max_edge = 1024;
    std::size_t max_upload_mb = 64;
    int threads = 0;
};

EditService* g_service = nullptr;

int run_serve(const ServeArgs& a) {
    ServiceOptions opt;
    opt.cors_origin = a.cors_origin;
    opt.journal_dir = a.journal_dir;
    opt.preview_max_edge = a.preview_max_edge;
    opt.max_upload_bytes = a.max_upload_mb << 20;
    opt.threads = a.threads;
    EditService svc(opt);
    if (!svc.bind(a.host, a.port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
    g_service = &svc;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    std::fprintf(stderr, "listening on http://%s:%d\n", a.host.c_str(), a.port);
    svc.listen_after_bind();
    g_service = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian LUT toolkit: fit, apply, bake, edit, evaluate, benchmark and serve color transforms"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key = value file ([subcommand] sections); flags override it");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a model to a .cube LUT, to an image pair, or several LUTs jointly");
    auto* fit_cube = fit->add_option("--cube", fa.cubes, "Source .cube LUT (repeat for a conditional multi-style model)")->check(CLI::ExistingFile);
    auto* fit_pairs = fit->add_option("--pairs", fa.pairs, "Aligned input and output PNG images")->expected(2)->check(CLI::ExistingFile);
    fit_cube->excludes(fit_pairs);
    fit->add_option("--gaussians,-n", fa.gaussians, "Number of Gaussian primitives")->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--epochs", fa.epochs, "Training epochs (20, or 40 for conditional models)")->check(CLI::PositiveNumber);
    fit->add_option("--batch", fa.batch, "Batch size (1024, or 8192 for conditional models)")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
    fit->add_option("--lr", fa.lr, "Base learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--lambda-hc", fa.lambda_hc, "Hue/chroma loss weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    fit->add_option("--lambda-sparse", fa.lambda_sparse, "Opacity sparsity weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    fit->add_option("--train-q", fa.train_q, "Training lattice samples per axis")->check(CLI::IsMember({2, 4, 8, 16, 32, 64, 128, 256}))->capture_default_str();
    fit->add_option("--holdout", fa.holdout, "Held-out lattice colors for validation")->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--threads", fa.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    fit->add_option("--conditional", fa.conditional, "Fit a conditional model: full or shared geometry")->check(CLI::IsMember({"full", "shared"}));
    fit->add_option("--hidden", fa.hidden, "Conditional generator width (64 small, 128 large)")->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--embedding-dim", fa.embedding_dim, "Style embedding size")->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--out,-o", fa.out, "Output model file")->required();
    fit->add_option("--log", fa.log, "Per-epoch JSON lines log (default: <out>.log.jsonl)");

    ApplyArgs aa;
    auto* apply = app.add_subcommand("apply", "Transform a PNG image");
    apply->add_option("--model,-m", aa.model, "Model file")->required()->check(CLI::ExistingFile);
    aa.choice.add_to(apply);
    apply->add_option("--keep-fraction", aa.keep_fraction, "Evaluate only the nearest fraction of primitives")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    apply->add_option("--threads", aa.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    apply->add_option("--bit-depth", aa.bit_depth, "Output PNG bit depth")->check(CLI::IsMember({8, 16}))->capture_default_str();
    apply->add_option("input", aa.in, "Input PNG")->required()->check(CLI::ExistingFile);
    apply->add_option("output", aa.out, "Output PNG")->required();

    BakeArgs ba;
    auto* bake = app.add_subcommand("bake", "Sample a model onto a .cube grid");
    bake->add_option("--model,-m", ba.model, "Model file")->required()->check(CLI::ExistingFile);
    ba.choice.add_to(bake);
    bake->add_option("--size", ba.size, "Grid points per axis")->check(CLI::Range(2, 256))->capture_default_str();
    bake->add_option("--threads", ba.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    bake->add_option("--title", ba.title, "TITLE line for the .cube file");
    bake->add_option("output", ba.out, "Output .cube file")->required();

    EditArgs ea;
    auto* edit = app.add_subcommand("edit", "Move the color at --cin toward --cout by adjusting the most influential primitives");
    edit->add_option("--model,-m", ea.model, "Model file")->required()->check(CLI::ExistingFile);
    edit->add_option("--style", ea.style, "Style of a conditional model to edit (the output is a plain model)");
    edit->add_option("--cin", ea.cin, "Source color, #rrggbb or r,g,b")->required();
    edit->add_option("--cout", ea.cout, "Target color, #rrggbb or r,g,b")->required();
    edit->add_option("--k", ea.k, "Number of primitives to adjust")->check(CLI::PositiveNumber)->capture_default_str();
    edit->add_option("--strength", ea.strength, "Edit strength in [0,1]")->capture_default_str();
    edit->add_option("--out,-o", ea.out, "Output model file")->required();
    edit->add_flag("--json", ea.json, "Print the edit record as JSON");

    EvalArgs va;
    auto* eval = app.add_subcommand("eval", "Held-out fidelity against a .cube LUT or an image pair");
    eval->add_option("--model,-m", va.model, "Model file")->required()->check(CLI::ExistingFile);
    va.choice.add_to(eval);
    auto* eval_cube = eval->add_option("--cube", va.cube, "Reference .cube LUT")->check(CLI::ExistingFile);
    auto* eval_pairs = eval->add_option("--pairs", va.pairs, "Aligned input and output PNG images")->expected(2)->check(CLI::ExistingFile);
    eval_cube->excludes(eval_pairs);
    eval->add_option("--train-q", va.train_q, "Training lattice used when fitting")->check(CLI::IsMember({2, 4, 8, 16, 32, 64, 128, 256}))->capture_default_str();
    eval->add_option("--holdout", va.holdout, "Held-out lattice colors")->check(CLI::PositiveNumber)->capture_default_str();
    eval->add_option("--keep-fraction", va.keep_fraction, "Evaluate only the nearest fraction of primitives")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    eval->add_option("--threads", va.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    eval->add_flag("--json", va.json, "Machine-readable output");

    BenchArgs bna;
    auto* bench = app.add_subcommand("bench", "Image throughput at several resolutions");
    bench->add_option("--model,-m", bna.model, "Model file")->required()->check(CLI::ExistingFile);
    bna.choice.add_to(bench);
    bench->add_option("--size", bna.sizes, "Resolutions as WxH (repeatable)")->capture_default_str();
    bench->add_option("--keep-fraction", bna.keep, "Keep fractions to compare (repeatable)")->capture_default_str();
    bench->add_option("--threads", bna.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    bench->add_option("--runs", bna.runs, "Timed passes")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--warmups", bna.warmups, "Untimed passes")->check(CLI::NonNegativeNumber)->capture_default_str();
    bench->add_flag("--json", bna.json, "Machine-readable output");

    ServeArgs sa;
    auto* serve = app.add_subcommand("serve", "Run the HTTP editing service");
    serve->add_option("--host", sa.host, "Bind address")->capture_default_str();
    serve->add_option("--port,-p", sa.port, "TCP port")->check(CLI::Range(1, 65535))->capture_default_str();
    serve->add_option("--cors-origin", sa.cors_origin, "Allowed browser origin")->capture_default_str();
    serve->add_option("--journal-dir", sa.journal_dir, "Mirror session journals here")->check(CLI::ExistingDirectory);
    serve->add_option("--preview-max-edge", sa.preview_max_edge, "Longest preview edge in pixels")->check(CLI::PositiveNumber)->capture_default_str();
    serve->add_option("--max-upload-mb", sa.max_upload_mb, "Upload size cap")->check(CLI::PositiveNumber)->capture_default_str();
    serve->add_option("--threads", sa.threads, "Worker threads for previews (0 = all cores)")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitArgs;
    }

    try {
        if (*fit) return run_fit(fa);
        if (*apply) return run_apply(aa);
        if (*bake) return run_bake(ba);
        if (*edit) return run_edit(ea);
        if (*eval) return run_eval(va);
        if (*bench) return run_bench(bna);
        if (*serve) return run_serve(sa);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitParse;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "model format error: %s\n", e.what());
        return kExitParse;
    } catch (const ImageError& e) {
        std::fprintf(stderr, "image error: %s\n", e.what());
        return kExitParse;
    } catch (const TrainingDiverged& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return kExitDiverged;
    } catch (const DegenerateEdit& e) {
        std::fprintf(stderr, "degenerate edit: %s\n", e.what());
        return kExitDegenerate;
    } catch (const InvalidEdit& e) {
        std::fprintf(stderr, "invalid edit: %s\n", e.what());
        return kExitInvalid;
    } catch (const InvalidRequest& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid value: %s\n", e.what());
        return kExitInvalid;
    }
    return kExitArgs;
}
