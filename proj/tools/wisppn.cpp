// Command-line front end: pack/inspect CSI containers, train, evaluate,
// infer and render skeletons.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wisppn/common.hpp"
#include "wisppn/csi.hpp"
#include "wisppn/metrics.hpp"
#include "wisppn/model.hpp"
#include "wisppn/pam.hpp"
#include "wisppn/pose.hpp"
#include "wisppn/render.hpp"
#include "wisppn/train.hpp"

namespace {

using namespace wisppn;

struct KeypointRecord {
    std::uint64_t timestamp_us = 0;
    std::array<Point, kNumKeypoints> points{};
};

std::vector<KeypointRecord> parse_keypoint_records(const std::string& text) {
    std::vector<KeypointRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            KeypointRecord r;
            r.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
            const auto& kps = j.at("keypoints");
            if (kps.size() != static_cast<std::size_t>(kNumKeypoints))
                throw FormatError("expected " + std::to_string(kNumKeypoints) + " keypoints");
            for (int k = 0; k < kNumKeypoints; ++k) {
                const auto& p = kps[static_cast<std::size_t>(k)];
                if (p.size() < 2) throw FormatError("keypoint entries must be [x, y]");
                r.points[static_cast<std::size_t>(k)] = {p[0].get<double>(), p[1].get<double>()};
            }
            out.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("keypoint record line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("keypoint record line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::string format_keypoint_record(std::uint64_t ts, const std::array<Point, kNumKeypoints>& pts) {
    nlohmann::json kps = nlohmann::json::array();
    for (const Point& p : pts) kps.push_back({p.x, p.y});
    nlohmann::json j{{"timestamp_us", ts}, {"keypoints", kps}};
    return j.dump();
}

int cmd_csi_pack(const std::string& in, const std::string& out) {
    const std::vector<CsiSample> samples = parse_csi_jsonl(read_file(in));
    write_file(out, write_csi_stream(samples));
    log_line(1, "packed " + std::to_string(samples.size()) + " samples into " + out);
    return 0;
}

int cmd_csi_dump(const std::string& in, const std::string& out) {
    const std::vector<CsiSample> samples = parse_csi_stream(read_file(in));
    const std::string text = write_csi_jsonl(samples);
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
    return 0;
}

std::vector<PairedSample> load_pairs(const std::string& csi_path,
                                     const std::string& annotations_path) {
    const std::vector<CsiSample> csi = parse_csi_stream(read_file(csi_path));
    const std::vector<FrameAnnotation> frames = parse_annotations(read_file(annotations_path));
    PairingResult pr = pair_frames(csi, frames);
    log_line(1, "paired " + std::to_string(pr.pairs.size()) + " frames (" +
                    std::to_string(pr.skipped_no_csi) + " without CSI, " +
                    std::to_string(pr.skipped_no_person) + " without a person)");
    return std::move(pr.pairs);
}

int cmd_train(const std::string& csi_path, const std::string& annotations_path,
              const std::string& out, double split, train::TrainConfig cfg) {
    std::vector<PairedSample> pairs = load_pairs(csi_path, annotations_path);
    const std::size_t train_n =
        static_cast<std::size_t>(split * static_cast<double>(pairs.size()));
    std::vector<PairedSample> train_set(pairs.begin(),
                                        pairs.begin() + static_cast<std::ptrdiff_t>(train_n));
    if (train_set.empty()) throw Error("training split is empty");
    train::TrainResult r = train::train(train_set, cfg, out, out + ".log");
    std::cout << "trained " << r.steps << " steps over " << cfg.epochs << " epochs on "
              << train_set.size() << " samples\n";
    if (!r.log.empty()) std::cout << "final mean loss " << r.log.back().mean_loss << "\n";
    std::cout << "checkpoint: " << out << "\nloss log: " << out << ".log\n";
    return 0;
}

std::array<Point, kNumKeypoints> infer_window(const CsiWindow& w, model::ModelParams& params) {
    return decode_ppam(model::forward(w, params, /*train=*/false));
}

int cmd_eval(const std::string& checkpoint, const std::string& csi_path,
             const std::string& annotations_path, const std::string& predictions_path,
             double split, const std::string& report_jsonl_path) {
    std::vector<std::array<Point, kNumKeypoints>> preds;
    std::vector<Keypoints> gts;

    if (!predictions_path.empty()) {
        // Score externally produced keypoint records against annotations.
        const std::vector<KeypointRecord> records =
            parse_keypoint_records(read_file(predictions_path));
        const std::vector<FrameAnnotation> frames =
            parse_annotations(read_file(annotations_path));
        std::size_t ri = 0;
        for (const FrameAnnotation& f : frames) {
            std::optional<Keypoints> kp = select_person(f);
            if (!kp) continue;
            while (ri < records.size() && records[ri].timestamp_us < f.timestamp_us) ++ri;
            if (ri == records.size() || records[ri].timestamp_us != f.timestamp_us)
                throw DimensionError("no prediction for frame at " +
                                     std::to_string(f.timestamp_us) + " us");
            preds.push_back(records[ri].points);
            gts.push_back(*kp);
        }
    } else {
        model::ModelParams params = model::load_checkpoint(checkpoint);
        std::vector<PairedSample> pairs = load_pairs(csi_path, annotations_path);
        const std::size_t start =
            static_cast<std::size_t>(split * static_cast<double>(pairs.size()));
        for (std::size_t i = start; i < pairs.size(); ++i) {
            preds.push_back(infer_window(pairs[i].window, params));
            gts.push_back(pairs[i].keypoints);
        }
    }

    if (preds.empty()) throw Error("nothing to evaluate");
    const metrics::PckResult r = metrics::pck(preds, gts);
    std::cout << metrics::render_report(r);
    if (!report_jsonl_path.empty()) write_file(report_jsonl_path, metrics::report_jsonl(r));
    return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& csi_path,
              const std::string& out) {
    model::ModelParams params = model::load_checkpoint(checkpoint);
    const std::vector<CsiSample> csi = parse_csi_stream(read_file(csi_path));
    std::string text;
    for (std::size_t at = 0; at + kSamplesPerWindow <= csi.size(); at += kSamplesPerWindow) {
        const std::uint64_t ts = csi[at + kSamplesPerWindow - 1].timestamp_us;
        const CsiWindow w = amplitude_window(
            std::span<const CsiSample>(csi.data() + at, kSamplesPerWindow), ts);
        text += format_keypoint_record(ts, infer_window(w, params));
        text += '\n';
    }
    if (out.empty())
        std::cout << text;
    else
        write_file(out, text);
    return 0;
}

int cmd_render(const std::string& in, const std::string& out_dir, int width, int height) {
    const std::vector<KeypointRecord> records = parse_keypoint_records(read_file(in));
    std::filesystem::create_directories(out_dir);
    std::size_t i = 0;
    for (const KeypointRecord& r : records) {
        std::ostringstream name;
        name << out_dir << "/skeleton_" << std::setw(6) << std::setfill('0') << i << "_"
             << r.timestamp_us << ".svg";
        write_file(name.str(), render::skeleton_svg(r.points, width, height));
        ++i;
    }
    std::cout << "wrote " << records.size() << " skeleton images to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WiFi single-person pose estimation toolkit"};
    app.require_subcommand(1);

    std::string in, out, csi_path, annotations_path, checkpoint, predictions, report_jsonl;
    double split = 0.8;
    int width = 640, height = 480;
    train::TrainConfig cfg;
    std::uint64_t seed = 0;
    int epochs = 20, batch = 32;
    double lr = 0.001;

    CLI::App* pack = app.add_subcommand("csi-pack", "JSONL CSI samples -> binary container");
    pack->add_option("--in", in, "input JSONL path")->required();
    pack->add_option("--out", out, "output container path")->required();

    CLI::App* dump = app.add_subcommand("csi-dump", "binary container -> JSONL CSI samples");
    dump->add_option("--in", in, "input container path")->required();
    dump->add_option("--out", out, "output JSONL path (stdout when omitted)");

    CLI::App* tr = app.add_subcommand("train", "train on paired CSI + annotations");
    tr->add_option("--csi", csi_path, "CSI container")->required();
    tr->add_option("--annotations", annotations_path, "annotation JSONL")->required();
    tr->add_option("--out", out, "checkpoint output path (log at <out>.log)")->required();
    tr->add_option("--seed", seed, "RNG seed");
    tr->add_option("--epochs", epochs, "training epochs");
    tr->add_option("--lr", lr, "initial learning rate");
    tr->add_option("--batch", batch, "batch size");
    tr->add_option("--split", split, "fraction of pairs used for training (chronological)");

    CLI::App* ev = app.add_subcommand("eval", "PCK report for a checkpoint or predictions");
    ev->add_option("--checkpoint", checkpoint, "trained checkpoint");
    ev->add_option("--csi", csi_path, "CSI container");
    ev->add_option("--annotations", annotations_path, "annotation JSONL")->required();
    ev->add_option("--predictions", predictions, "score these keypoint records instead");
    ev->add_option("--split", split, "evaluate the last (1 - split) fraction of pairs");
    ev->add_option("--report-jsonl", report_jsonl, "also write the report as JSONL");

    CLI::App* inf = app.add_subcommand("infer", "keypoint records from raw CSI");
    inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    inf->add_option("--csi", csi_path, "CSI container")->required();
    inf->add_option("--out", out, "output JSONL path (stdout when omitted)");

    CLI::App* ren = app.add_subcommand("render", "SVG skeletons from keypoint records");
    ren->add_option("--in", in, "keypoint record JSONL")->required();
    ren->add_option("--out-dir", out, "output directory")->required();
    ren->add_option("--width", width, "canvas width");
    ren->add_option("--height", height, "canvas height");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pack->parsed()) return cmd_csi_pack(in, out);
        if (dump->parsed()) return cmd_csi_dump(in, out);
        if (tr->parsed()) {
            cfg.seed = seed;
            cfg.epochs = epochs;
            cfg.initial_lr = lr;
            cfg.batch_size = batch;
            return cmd_train(csi_path, annotations_path, out, split, cfg);
        }
        if (ev->parsed()) {
            if (predictions.empty() && (checkpoint.empty() || csi_path.empty())) {
                std::cerr << "eval needs either --predictions or both --checkpoint and --csi\n";
                return 1;
            }
            return cmd_eval(checkpoint, csi_path, annotations_path, predictions, split,
                            report_jsonl);
        }
        if (inf->parsed()) return cmd_infer(checkpoint, csi_path, out);
        if (ren->parsed()) return cmd_render(in, out, width, height);
        return 1;
    } catch (const wisppn::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const wisppn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
