#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "wisppn/common.hpp"
#include "wisppn/csi.hpp"
#include "wisppn/pose.hpp"
#include "wisppn/train.hpp"

using namespace wisppn;

namespace {

namespace fs = std::filesystem;

struct CliRun {
    int exit_code = -1;
    std::string out, err;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "wisppn_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliRun run_cli(const std::string& args) {
    const fs::path out = work_dir() / "stdout.txt";
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd = std::string(WISPPN_CLI_BIN) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out.string());
    r.err = read_file(err.string());
    return r;
}

}  // namespace

TEST_CASE("csi-pack and csi-dump invert each other at f32 precision") {
    Rng rng(120);
    std::vector<CsiSample> samples;
    for (int i = 0; i < 7; ++i) {
        CsiSample s;
        s.timestamp_us = 1000 + static_cast<std::uint64_t>(i) * 777;
        for (auto& h : s.csi)
            h = {static_cast<double>(static_cast<float>(rng.uniform(-5.0, 5.0))),
                 static_cast<double>(static_cast<float>(rng.uniform(-5.0, 5.0)))};
        samples.push_back(s);
    }
    const fs::path in = work_dir() / "csi_in.jsonl";
    const fs::path packed = work_dir() / "csi.wcsi";
    const fs::path dumped = work_dir() / "csi_out.jsonl";
    write_file(in.string(), write_csi_jsonl(samples));

    CHECK(run_cli("csi-pack --in " + in.string() + " --out " + packed.string()).exit_code == 0);
    CHECK(run_cli("csi-dump --in " + packed.string() + " --out " + dumped.string()).exit_code ==
          0);

    const auto back = parse_csi_jsonl(read_file(dumped.string()));
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].timestamp_us == samples[i].timestamp_us);
        for (std::size_t k = 0; k < samples[i].csi.size(); ++k) {
            CHECK(back[i].csi[k].real() == samples[i].csi[k].real());
            CHECK(back[i].csi[k].imag() == samples[i].csi[k].imag());
        }
    }
}

TEST_CASE("unknown flags are usage errors on stderr with exit code 1") {
    const CliRun r = run_cli("csi-dump --no-such-flag x");
    CHECK(r.exit_code == 1);
    CHECK(!r.err.empty());

    CHECK(run_cli("").exit_code == 1);
    CHECK(run_cli("frobnicate").exit_code == 1);
}

TEST_CASE("missing files and malformed input exit with code 2") {
    CHECK(run_cli("csi-dump --in /nonexistent/path.wcsi").exit_code == 2);
    const fs::path junk = work_dir() / "junk.wcsi";
    write_file(junk.string(), "not a container");
    CHECK(run_cli("csi-dump --in " + junk.string()).exit_code == 2);
}

TEST_CASE("eval --predictions scores identical predictions at 1.0 everywhere") {
    const auto data = train::synth_dataset(77, 5);
    const train::SynthCapture cap = train::synth_capture(data);
    const fs::path ann = work_dir() / "gts.jsonl";
    write_file(ann.string(), write_annotations(cap.frames));

    std::string preds;
    for (const auto& ps : data) {
        preds += "{\"timestamp_us\":" + std::to_string(ps.window.frame_timestamp_us) +
                 ",\"keypoints\":[";
        for (int k = 0; k < kNumKeypoints; ++k) {
            if (k) preds += ",";
            char buf[80];
            std::snprintf(buf, sizeof buf, "[%.17g,%.17g]", ps.keypoints[k].x,
                          ps.keypoints[k].y);
            preds += buf;
        }
        preds += "]}\n";
    }
    const fs::path pred_path = work_dir() / "preds.jsonl";
    write_file(pred_path.string(), preds);

    const CliRun r = run_cli("eval --predictions " + pred_path.string() + " --annotations " +
                             ann.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("Average") != std::string::npos);
    CHECK(r.out.find("1.0000") != std::string::npos);
    CHECK(r.out.find("0.0000") == std::string::npos);

    CHECK(run_cli("eval --annotations " + ann.string()).exit_code == 1);
}

TEST_CASE("train, eval, infer and render wire together on a tiny synthetic set") {
    const auto data = train::synth_dataset(9, 2);
    const train::SynthCapture cap = train::synth_capture(data);
    const fs::path csi = work_dir() / "pipe.wcsi";
    const fs::path ann = work_dir() / "pipe_ann.jsonl";
    const fs::path ckpt = work_dir() / "pipe.ckpt";
    write_file(csi.string(), write_csi_stream(cap.csi));
    write_file(ann.string(), write_annotations(cap.frames));

    const CliRun tr = run_cli("train --csi " + csi.string() + " --annotations " + ann.string() +
                              " --out " + ckpt.string() +
                              " --epochs 1 --batch 2 --seed 3 --split 1.0");
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(ckpt.string() + ".log"));
    const std::string log = read_file(ckpt.string() + ".log");
    CHECK(log.find("\"epoch\":1") != std::string::npos);
    CHECK(log.find("mean_loss") != std::string::npos);
    CHECK(log.find("wall_ms") != std::string::npos);

    const CliRun ev = run_cli("eval --checkpoint " + ckpt.string() + " --csi " + csi.string() +
                              " --annotations " + ann.string() + " --split 0 --report-jsonl " +
                              (work_dir() / "report.jsonl").string());
    CHECK(ev.exit_code == 0);
    CHECK(ev.out.find("Average") != std::string::npos);
    CHECK(fs::exists(work_dir() / "report.jsonl"));

    const fs::path preds = work_dir() / "infer.jsonl";
    const CliRun inf = run_cli("infer --checkpoint " + ckpt.string() + " --csi " + csi.string() +
                               " --out " + preds.string());
    CHECK(inf.exit_code == 0);
    std::size_t lines = 0;
    for (char ch : read_file(preds.string()))
        if (ch == '\n') ++lines;
    CHECK(lines == data.size());  // 5 samples per window, non-overlapping

    const fs::path svg_dir = work_dir() / "skeletons";
    const CliRun ren = run_cli("render --in " + preds.string() + " --out-dir " +
                               svg_dir.string());
    CHECK(ren.exit_code == 0);
    std::size_t svg_count = 0;
    for (const auto& entry : fs::directory_iterator(svg_dir)) {
        ++svg_count;
        const std::string svg = read_file(entry.path().string());
        std::size_t limbs = 0;
        for (std::size_t at = svg.find("<line"); at != std::string::npos;
             at = svg.find("<line", at + 1))
            ++limbs;
        CHECK(limbs == 17);
        std::size_t joints = 0;
        for (std::size_t at = svg.find("<circle"); at != std::string::npos;
             at = svg.find("<circle", at + 1))
            ++joints;
        CHECK(joints == kNumKeypoints);
    }
    CHECK(svg_count == data.size());
}

TEST_CASE("training divergence exits with code 3 and a last-good checkpoint") {
    const auto data = train::synth_dataset(13, 2);
    const train::SynthCapture cap = train::synth_capture(data);
    const fs::path csi = work_dir() / "div.wcsi";
    const fs::path ann = work_dir() / "div_ann.jsonl";
    const fs::path ckpt = work_dir() / "div.ckpt";
    write_file(csi.string(), write_csi_stream(cap.csi));
    write_file(ann.string(), write_annotations(cap.frames));

    const CliRun r = run_cli("train --csi " + csi.string() + " --annotations " + ann.string() +
                             " --out " + ckpt.string() +
                             " --epochs 2 --batch 2 --seed 3 --split 1.0 --lr 1e200");
    CHECK(r.exit_code == 3);
    CHECK(fs::exists(ckpt));
}
