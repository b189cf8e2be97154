#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpf/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + VPF_CLI_PATH + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// A tiny experiment so every command finishes in seconds.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("vpf_cli_test_" + std::to_string(getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.cfg") << "seed = 3\nworkers = 1\nobjects = 6\nviews_per_object = 6\nimage_size = 16\n"
                                        "d = 2\nc = 8\nheads = 2\nff = 16\nbands = 3\nencoder_widths = 8,8,8,8\n"
                                        "hidden = 16\npixel_layers = 1\nk_max = 2\npoints = 64\niterations = 10\n"
                                        "warmup = 2\ndecay_end = 10\nresolution = 12\neval_samples = 2000\n"
                                        "log_every = 2\ncheckpoint_every = 5\n";
    const auto g = run(base() + " gen-data --out " + (dir_ / "ds").string());
    ASSERT_EQ(g.code, 0) << g.out;
    const auto t = run(base() + " train --data " + (dir_ / "ds").string() + " --out " + ckpt());
    ASSERT_EQ(t.code, 0) << t.out;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string base() { return "--config " + (dir_ / "tiny.cfg").string(); }
  static std::string ckpt() { return (dir_ / "m.vpfk").string(); }
  static std::string ds() { return (dir_ / "ds").string(); }
  static fs::path dir_;
};
fs::path Cli::dir_;

TEST_F(Cli, GenDataCountsAndDeterminism) {
  const auto a = run(base() + " gen-data --objects 5 --out " + (dir_ / "a").string());
  const auto b = run(base() + " gen-data --objects 5 --out " + (dir_ / "b").string());
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_NE(a.out.find("objects 5"), std::string::npos);
  EXPECT_NE(a.out.find("manifest.jsonl"), std::string::npos);
  const auto ma = slurp(dir_ / "a" / "manifest.jsonl");
  EXPECT_EQ(ma, slurp(dir_ / "b" / "manifest.jsonl"));
  EXPECT_EQ(std::count(ma.begin(), ma.end(), '\n'), 5);
  EXPECT_EQ(slurp(dir_ / "a" / "obj_0003" / "view_02.ppm"), slurp(dir_ / "b" / "obj_0003" / "view_02.ppm"));
}

TEST_F(Cli, TrainWritesCheckpointAndFourColumnLog) {
  ASSERT_TRUE(fs::exists(ckpt()));
  std::ifstream log(ckpt() + ".csv");
  std::string line;
  int rows = 0;
  while (std::getline(log, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 6);  // header + iterations 2, 4, ..., 10
  EXPECT_EQ(vpf::pipeline::load_checkpoint(ckpt()).state.iteration, 10);
}

TEST_F(Cli, ResumeContinuesTheIterationCounter) {
  const auto copy = (dir_ / "resume.vpfk").string();
  fs::copy_file(ckpt(), copy, fs::copy_options::overwrite_existing);
  fs::copy_file(ckpt() + ".csv", copy + ".csv", fs::copy_options::overwrite_existing);
  const auto r = run(base() + " train --resume --iterations 14 --data " + ds() + " --out " + copy);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(vpf::pipeline::load_checkpoint(copy).state.iteration, 14);
  const auto log = slurp(copy + ".csv");
  EXPECT_NE(log.find("\n12,"), std::string::npos);
  EXPECT_NE(log.find("\n14,"), std::string::npos);
}

TEST_F(Cli, ReconstructOneAndFiveViewsAndOrderIndependence) {
  const auto obj = (fs::path(ds()) / "obj_0000").string();
  const auto one = run(base() + " reconstruct --checkpoint " + ckpt() + " --object " + obj + " --views 2 --out " +
                       (dir_ / "one.obj").string());
  EXPECT_EQ(one.code, 0) << one.out;
  const auto a = run(base() + " reconstruct --checkpoint " + ckpt() + " --object " + obj +
                     " --views 0,1,2,3,4 --out " + (dir_ / "five_a.obj").string());
  const auto b = run(base() + " reconstruct --checkpoint " + ckpt() + " --object " + obj +
                     " --views 4,2,0,3,1 --out " + (dir_ / "five_b.obj").string());
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(slurp(dir_ / "five_a.obj"), slurp(dir_ / "five_b.obj"));
}

TEST_F(Cli, ReconstructFromImageFiles) {
  const auto obj = fs::path(ds()) / "obj_0001";
  std::ifstream cams(obj / "cameras.jsonl");
  std::string l0, l1;
  std::getline(cams, l0);
  std::getline(cams, l1);
  std::ofstream(dir_ / "cams.jsonl") << l0 << "\n" << l1 << "\n";
  const auto r = run(base() + " reconstruct --checkpoint " + ckpt() + " --image " + (obj / "view_00.ppm").string() +
                     " --image " + (obj / "view_01.ppm").string() + " --cameras " + (dir_ / "cams.jsonl").string() +
                     " --out " + (dir_ / "files.obj").string());
  EXPECT_EQ(r.code, 0) << r.out;
  const auto bad = run(base() + " reconstruct --checkpoint " + ckpt() + " --image " +
                       (obj / "view_00.ppm").string() + " --cameras " + (dir_ / "cams.jsonl").string() +
                       " --out " + (dir_ / "bad.obj").string());
  EXPECT_EQ(bad.code, 1) << bad.out;
}

TEST_F(Cli, LevelFlagAppearsInLogHeader) {
  const auto r = run(base() + " reconstruct --level 0.5 --checkpoint " + ckpt() + " --object " +
                     (fs::path(ds()) / "obj_0000").string() + " --out " + (dir_ / "lv.obj").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("level=0.5"), std::string::npos) << r.out;
  const auto d = run(base() + " reconstruct --checkpoint " + ckpt() + " --object " +
                     (fs::path(ds()) / "obj_0000").string() + " --out " + (dir_ / "lv.obj").string());
  EXPECT_NE(d.out.find("level=0.43"), std::string::npos) << d.out;
}

TEST_F(Cli, EvaluateRowsPerViewCountAndSeededRerun) {
  const auto a = run(base() + " evaluate --checkpoint " + ckpt() + " --data " + ds() +
                     " --split train --views 1,2,4 --out " + (dir_ / "ra").string());
  const auto b = run(base() + " evaluate --checkpoint " + ckpt() + " --data " + ds() +
                     " --split train --views 1,2,4 --out " + (dir_ / "rb").string());
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 4);  // header + 3 rows
  EXPECT_EQ(slurp(dir_ / "ra" / "report.jsonl"), slurp(dir_ / "rb" / "report.jsonl"));
}

TEST_F(Cli, ExitCodes) {
  const auto missing = run(base() + " evaluate --checkpoint " + (dir_ / "nope.vpfk").string() + " --data " + ds());
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.out.find("checkpoint not found"), std::string::npos) << missing.out;
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run(base() + " train --data " + ds()).code, 1);  // --out missing
  std::ofstream(dir_ / "bad.cfg") << "no_such_key = 1\n";
  EXPECT_EQ(run("--config " + (dir_ / "bad.cfg").string() + " gen-data --out " + (dir_ / "x").string()).code, 1);
  EXPECT_EQ(run(base() + " train --data " + (dir_ / "empty").string() + " --out " + (dir_ / "e.vpfk").string()).code,
            2);
  EXPECT_EQ(run(base() + " evaluate --checkpoint " + ckpt() + " --data " + ds(), "VPFK_PRECISION=f16").code, 1);
}

TEST_F(Cli, PrecisionFromEnvironment) {
  const auto out = (dir_ / "f64.vpfk").string();
  const auto r = run(base() + " train --iterations 2 --data " + ds() + " --out " + out, "VPFK_PRECISION=f64");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(vpf::pipeline::load_checkpoint(out).model->config().dtype, vpf::DType::f64);
}

}  // namespace
