#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "qrgmm/csv.hpp"
#include "qrgmm/errors.hpp"
#include "qrgmm/metamodel.hpp"
#include "qrgmm/multioutput.hpp"
#include "qrgmm/nn.hpp"
#include "qrgmm/rng.hpp"
#include "qrgmm/serialize.hpp"
#include "qrgmm/testbeds.hpp"
#include "test_support.hpp"

using namespace qrgmm;

namespace {

std::string tmp_path(const std::string& name) {
  return "/tmp/qrgmm_sercsv_" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(bool(out));
  out << content;
}

void replace_once(std::string& text, const std::string& from,
                  const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
}

GenerativeMetamodel fitted_single(bool rearranged) {
  SeededRng rng(501);
  const auto inst = testsupport::random_instance(rng, 40, 3);
  const Dataset data = validate_dataset(inst.X, inst.y);
  GenerativeMetamodel model =
      fit_grid(data, BasisSpec::identity(3), 7, SolverOptions{});
  model.rearranged = rearranged;
  return model;
}

}  // namespace

TEST_CASE("single model survives a save-load round trip") {
  for (bool rearranged : {false, true}) {
    const GenerativeMetamodel model = fitted_single(rearranged);
    const std::string path = tmp_path("single.json");
    save_model(model, path);
    CHECK(peek_model_kind(path) == ModelKind::single);

    const GenerativeMetamodel loaded = load_model(path);
    CHECK(loaded.basis.kind == model.basis.kind);
    CHECK(loaded.basis.input_dim == model.basis.input_dim);
    CHECK(loaded.basis.degree == model.basis.degree);
    CHECK(loaded.table.grid.m == model.table.grid.m);
    CHECK(loaded.table.coefficients == model.table.coefficients);
    CHECK(loaded.rearranged == model.rearranged);

    SeededRng qrng(77);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd x(3);
      x << 1.0, 10.0 * qrng.next_uniform() - 5.0,
          10.0 * qrng.next_uniform() - 5.0;
      const double tau = 0.001 + 0.998 * qrng.next_uniform();
      CHECK(predict_quantile(loaded, x, tau) ==
            predict_quantile(model, x, tau));
    }
    SeededRng g1(3), g2(3);
    Eigen::VectorXd x0(3);
    x0 << 1.0, 0.5, -2.0;
    CHECK(generate(loaded, x0, 100, g1) == generate(model, x0, 100, g2));
  }
}

TEST_CASE("sequential model survives a save-load round trip") {
  SeededRng rng(502);
  const Dataset data = add_intercept(sample_bivariate_dataset(200, rng));
  const SequentialModel model = fit_multi(
      data, {BasisSpec::identity(3), BasisSpec::identity(4)}, 5);

  const std::string path = tmp_path("multi.json");
  save_model(model, path);
  CHECK(peek_model_kind(path) == ModelKind::multi);

  const SequentialModel loaded = load_multi_model(path);
  REQUIRE(loaded.d == 2);
  REQUIRE(loaded.stages.size() == 2);
  for (size_t l = 0; l < 2; ++l) {
    CHECK(loaded.stages[l].table.coefficients ==
          model.stages[l].table.coefficients);
    CHECK(loaded.stages[l].basis.input_dim == model.stages[l].basis.input_dim);
  }

  Eigen::VectorXd x(3);
  x << 1.0, 2.0, -1.0;
  SeededRng g1(9), g2(9);
  CHECK(generate_multi(loaded, x, 50, g1) == generate_multi(model, x, 50, g2));

  CHECK_THROWS_AS(load_model(path), CorruptFile);
}

TEST_CASE("network model survives a save-load round trip") {
  SeededRng rng(503);
  const Dataset data = sample_dataset(make_tp2(), 60, rng);
  MlpSpec spec = MlpSpec::defaults(2);
  spec.widths = {2, 3, 1};
  spec.seed = 5;
  spec.epochs = 3;
  const NnQuantileModel model = fit_nn_grid(data, spec, 4);

  const std::string path = tmp_path("nn.json");
  save_model(model, path);
  CHECK(peek_model_kind(path) == ModelKind::nn);

  const NnQuantileModel loaded = load_nn_model(path);
  REQUIRE(loaded.networks.size() == 3);
  CHECK(loaded.grid.m == 4);
  CHECK(loaded.spec.widths == spec.widths);
  for (size_t j = 0; j < 3; ++j)
    for (size_t l = 0; l < loaded.networks[j].weights.size(); ++l) {
      CHECK(loaded.networks[j].weights[l] == model.networks[j].weights[l]);
      CHECK(loaded.networks[j].biases[l] == model.networks[j].biases[l]);
    }

  Eigen::VectorXd x(2);
  x << 4.0, -1.0;
  SeededRng g1(4), g2(4);
  CHECK(nn_generate(loaded, x, 200, g1) == nn_generate(model, x, 200, g2));
}

TEST_CASE("format and rng tags are enforced on load") {
  const GenerativeMetamodel model = fitted_single(false);
  const std::string path = tmp_path("tamper.json");

  save_model(model, path);
  std::string text = slurp(path);
  replace_once(text, "\"format_version\": 1", "\"format_version\": 2");
  spit(path, text);
  CHECK_THROWS_AS(load_model(path), FormatVersionMismatch);
  CHECK_THROWS_AS(peek_model_kind(path), FormatVersionMismatch);

  save_model(model, path);
  text = slurp(path);
  replace_once(text, "xoshiro256++/v1", "mt19937/v0");
  spit(path, text);
  CHECK_THROWS_AS(load_model(path), FormatVersionMismatch);
}

TEST_CASE("broken model files are reported as corrupt") {
  const std::string path = tmp_path("broken.json");
  CHECK_THROWS_AS(load_model(tmp_path("missing-file.json")), CorruptFile);

  const GenerativeMetamodel model = fitted_single(false);
  save_model(model, path);
  const std::string text = slurp(path);
  spit(path, text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_model(path), CorruptFile);

  spit(path, "{\"format_version\": 1}");
  CHECK_THROWS_AS(peek_model_kind(path), CorruptFile);
  CHECK_THROWS_AS(load_model(path), CorruptFile);

  spit(path, "{}");
  CHECK_THROWS_AS(load_model(path), CorruptFile);
}

TEST_CASE("dataset csv round trip is bit exact") {
  Eigen::MatrixXd design(5, 2);
  design << 1.0, 0.1, -2.75, 6.02e23, 1e-300, 3.0, 0.30000000000000004, -5.5,
      2.0, 7.0;
  Eigen::VectorXd response(5);
  response << -1.5, 0.0, 42.0, 1e-12, 2.5;
  const Dataset data = validate_dataset(design, response);

  const std::string path = tmp_path("data.csv");
  write_dataset_csv(data, path);
  const std::string text = slurp(path);
  CHECK(text.substr(0, text.find('\n')) == "x1,x2,y1");

  const Dataset loaded = read_dataset_csv(path);
  CHECK(loaded.design == data.design);
  CHECK(loaded.response == data.response);
}

TEST_CASE("multi-output dataset csv keeps both response columns") {
  SeededRng rng(504);
  const Dataset data = sample_bivariate_dataset(20, rng);
  const std::string path = tmp_path("bidata.csv");
  write_dataset_csv(data, path);
  const std::string text = slurp(path);
  CHECK(text.substr(0, text.find('\n')) == "x1,x2,y1,y2");
  const Dataset loaded = read_dataset_csv(path);
  CHECK(loaded.design == data.design);
  CHECK(loaded.response == data.response);
}

TEST_CASE("dataset csv rejects malformed input with line numbers") {
  const std::string path = tmp_path("bad.csv");

  spit(path, "a,b\n1,2\n");
  CHECK_THROWS_AS(read_dataset_csv(path), CorruptFile);

  spit(path, "x1,y1,x2\n1,2,3\n");
  CHECK_THROWS_AS(read_dataset_csv(path), CorruptFile);

  spit(path, "x1,y1\n1,abc\n");
  try {
    read_dataset_csv(path);
    FAIL("expected a parse failure");
  } catch (const CorruptFile& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  spit(path, "x1,y1\n1,2\n3\n");
  try {
    read_dataset_csv(path);
    FAIL("expected a cell-count failure");
  } catch (const CorruptFile& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  spit(path, "x1,y1\n");
  CHECK_THROWS_AS(read_dataset_csv(path), CorruptFile);

  spit(path, "");
  CHECK_THROWS_AS(read_dataset_csv(path), CorruptFile);
}

TEST_CASE("samples csv round trip and header check") {
  Eigen::MatrixXd samples(4, 1);
  samples << 0.1, -2.0, 3.25, 1e-7;
  const std::string path = tmp_path("samples.csv");
  write_samples_csv(samples, path);
  CHECK(slurp(path).substr(0, 2) == "y1");
  CHECK(read_samples_csv(path) == samples);

  Eigen::MatrixXd wide(3, 2);
  wide << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  write_samples_csv(wide, path);
  const std::string text = slurp(path);
  CHECK(text.substr(0, text.find('\n')) == "y1,y2");
  CHECK(read_samples_csv(path) == wide);

  spit(path, "x1,y1\n1,2\n");
  CHECK_THROWS_AS(read_samples_csv(path), CorruptFile);
}

TEST_CASE("dataset csv accepts crlf line endings") {
  const std::string path = tmp_path("crlf.csv");
  spit(path, "x1,y1\r\n1.5,2.5\r\n3,4\r\n");
  const Dataset data = read_dataset_csv(path);
  CHECK(data.n() == 2);
  CHECK(data.design(0, 0) == 1.5);
  CHECK(data.response(1, 0) == 4.0);
}

TEST_CASE("saving an invalid model is refused") {
  GenerativeMetamodel model = fitted_single(false);
  model.table.coefficients.resize(2, 3);
  model.table.coefficients.setZero();
  CHECK_THROWS_AS(save_model(model, tmp_path("never.json")),
                  Error);
}
