#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsidn/checkpoint.hpp"

using namespace lsidn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = std::string("ckpt_test_") + name + ".txt";
  }
  ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("format_double survives a parse round trip") {
  for (double v : {0.1, 1.0 / 3.0, 3.141592653589793, 1e-300, 1e300, -0.0, 0.0,
                   123456789.123456789, 2.2250738585072014e-308}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("checkpoints round-trip config and parameter values exactly") {
  TempFile tmp("roundtrip");
  std::vector<std::pair<std::string, std::string>> config{
      {"d", "16"}, {"lr", "0.003"}, {"variant", "full"}};
  std::vector<Parameter> params{
      {"embed/items", Tensor::from_values(2, 3, {0.1, 1.0 / 3.0, -0.0, 1e-300,
                                                 3.141592653589793, -7.5},
                                          true)},
      {"head/b", Tensor::from_values(1, 1, {0.25}, true)},
  };
  save_checkpoint(tmp.path, config, params);

  Checkpoint ck = load_checkpoint(tmp.path);
  CHECK(ck.config == config);
  REQUIRE(ck.params.size() == 2);
  CHECK(ck.params[0].name == "embed/items");
  CHECK(ck.params[0].rows == 2);
  CHECK(ck.params[0].cols == 3);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(ck.params[0].values[i] == params[0].tensor.values()[i]);
  CHECK(std::signbit(ck.params[0].values[2]));  // -0.0 preserved
  CHECK(ck.params[1].values[0] == 0.25);

  SUBCASE("apply_checkpoint copies into matching tensors") {
    std::vector<Parameter> fresh{
        {"embed/items", Tensor::zeros(2, 3, true)},
        {"head/b", Tensor::zeros(1, 1, true)},
    };
    apply_checkpoint(ck, fresh);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(fresh[0].tensor.values()[i] == params[0].tensor.values()[i]);
    CHECK(fresh[1].tensor.values()[0] == 0.25);
  }

  SUBCASE("shape mismatch is an error") {
    std::vector<Parameter> wrong{{"embed/items", Tensor::zeros(3, 2, true)},
                                 {"head/b", Tensor::zeros(1, 1, true)}};
    CHECK_THROWS_AS(apply_checkpoint(ck, wrong), std::runtime_error);
  }

  SUBCASE("leftover checkpoint entry is an error") {
    std::vector<Parameter> missing{{"embed/items", Tensor::zeros(2, 3, true)}};
    CHECK_THROWS_AS(apply_checkpoint(ck, missing), std::runtime_error);
  }

  SUBCASE("model parameter absent from the checkpoint is an error") {
    std::vector<Parameter> extra{
        {"embed/items", Tensor::zeros(2, 3, true)},
        {"head/b", Tensor::zeros(1, 1, true)},
        {"mystery", Tensor::zeros(1, 1, true)},
    };
    CHECK_THROWS_AS(apply_checkpoint(ck, extra), std::runtime_error);
  }
}

TEST_CASE("config keys keep their order and spacing survives reload") {
  TempFile tmp("order");
  std::vector<std::pair<std::string, std::string>> config{
      {"zeta", "1"}, {"alpha", "2"}, {"omega_minutes", "360"}};
  save_checkpoint(tmp.path, config, {});
  Checkpoint ck = load_checkpoint(tmp.path);
  REQUIRE(ck.config.size() == 3);
  CHECK(ck.config[0].first == "zeta");
  CHECK(ck.config[2].second == "360");
  CHECK(ck.params.empty());
}

TEST_CASE("malformed checkpoints are rejected") {
  TempFile tmp("bad");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.txt"), std::runtime_error);
  }
  SUBCASE("wrong magic") {
    write_text(tmp.path, "other-format v9\nend\n");
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);
  }
  SUBCASE("truncated parameter block") {
    write_text(tmp.path,
               "lsidn-checkpoint v1\nconfig 0\nparams 1\nparam w 2 2\n1 2\n");
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);
  }
  SUBCASE("row with wrong arity") {
    write_text(tmp.path,
               "lsidn-checkpoint v1\nconfig 0\nparams 1\nparam w 1 3\n1 2\nend\n");
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);
  }
  SUBCASE("missing end marker") {
    write_text(tmp.path, "lsidn-checkpoint v1\nconfig 0\nparams 0\n");
    CHECK_THROWS_AS(load_checkpoint(tmp.path), std::runtime_error);
  }
}
