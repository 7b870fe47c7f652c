// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "daft/io.hpp"
#include "daft/learners/lr.hpp"
#include "daft/learners/rf.hpp"
#include "daft/report.hpp"
#include "testing.hpp"

using namespace daft;
using daft::testing::error_code;
using daft::testing::fixture;

namespace {

const char* kTwoModels = R"({
  "classes": ["negative", "positive"],
  "models": [
    {"id": "a", "base_model_tag": "roberta-base", "source_dataset_tag": "amazon", "backend": "file:a.jsonl",
     "classes": ["negative", "positive"], "mapping": [1, 0, 0, 1]},
    {"id": "b", "base_model_tag": "bert-base-uncased", "source_dataset_tag": "yelp",
     "backend": "http://127.0.0.1:9/predict", "classes": ["negative", "positive"]}
  ]
})";

}  // namespace

TEST(Registry, TwoBinaryModels) {
  const auto reg = parse_registry(kTwoModels);
  ASSERT_EQ(reg.size(), 2u);
  EXPECT_EQ(reg.models()[0].source_dataset_tag, "amazon");
  EXPECT_EQ(reg.models()[0].backend.type, backend::kind::prediction_file);
  EXPECT_EQ(reg.models()[1].backend.type, backend::kind::http_endpoint);
  EXPECT_EQ(reg.models()[1].mapping.matrix(), output_mapping::identity(reg.target()).matrix());
}

TEST(Registry, DuplicateId) {
  std::string text = kTwoModels;
  text.replace(text.find("\"id\": \"b\""), 9, "\"id\": \"a\"");
  EXPECT_EQ(error_code([&] { parse_registry(text); }), errc::duplicate_model_id);
}

TEST(Registry, TweetStyleThreeClassMapping) {
  const auto reg = parse_registry(R"({
    "classes": ["negative", "positive"],
    "models": [{"id": "tweet", "base_model_tag": "roberta-base", "source_dataset_tag": "tweet",
                "backend": "synthetic:tweet", "classes": ["negative", "neutral", "positive"],
                "mapping": [1, 0, 0, 0, 0, 1]}]
  })");
  const auto& m = reg.models()[0];
  EXPECT_EQ(m.native_space.arity(), 3u);
  EXPECT_EQ(m.backend.type, backend::kind::synthetic);
  const auto mapped = map_outputs(validate_prediction_matrix("tweet", {{0.2, 0.5, 0.3}}, m.native_space), m.mapping);
  EXPECT_NEAR(mapped(0, 0), 0.4, 1e-15);
  EXPECT_NEAR(mapped(0, 1), 0.6, 1e-15);
}

TEST(Registry, Errors) {
  EXPECT_EQ(error_code([] { parse_registry("{not json"); }), errc::parse_error);
  EXPECT_EQ(error_code([] { parse_registry(R"({"classes": ["a", "b"]})"); }), errc::parse_error);
  // Native classes differ from the target and no mapping is given.
  EXPECT_EQ(error_code([] {
              parse_registry(R"({"classes": ["a", "b"], "models": [{"id": "m", "backend": "file:x",
                                 "classes": ["a", "b", "c"]}]})");
            }),
            errc::mapping_arity_mismatch);
  EXPECT_EQ(error_code([] {
              parse_registry(R"({"classes": ["a", "b"], "models": [{"id": "m", "backend": "file:x",
                                 "classes": ["a", "b", "c"], "mapping": [1, 0, 0, 1]}]})");
            }),
            errc::mapping_arity_mismatch);
}

TEST(Registry, FormatRoundTrip) {
  const auto reg = parse_registry(kTwoModels);
  const auto text = format_registry(reg);
  EXPECT_EQ(format_registry(parse_registry(text)), text);
}

TEST(Registry, ShippedToyFixture) {
  const auto reg = load_registry(fixture("toy/registry.json"));
  EXPECT_EQ(reg.size(), 2u);
  EXPECT_EQ(reg.target().classes(), (std::vector<std::string>{"negative", "positive"}));
}

TEST(PredictionFile, HeaderPlusOneRecord) {
  const auto f = parse_prediction_file(R"({"model_id": "m", "classes": ["negative", "positive"]}
{"id": "x", "probs": [0.25, 0.75], "label": 1}
)",
                                       nullptr, "mem");
  EXPECT_EQ(f.matrix.rows(), 1u);
  EXPECT_EQ(f.matrix.model_id(), "m");
  EXPECT_EQ(f.matrix.ids(), (std::vector<std::string>{"x"}));
  ASSERT_TRUE(f.labels);
  EXPECT_EQ(*f.labels, (std::vector<std::size_t>{1}));
}

TEST(PredictionFile, Errors) {
  const auto bin = daft::testing::binary();
  EXPECT_EQ(error_code([&] {
              parse_prediction_file("{\"model_id\": \"m\", \"classes\": [\"negative\", \"positive\"]}\n"
                                    "{\"id\": \"x\", \"probs\": [0.2, 0.3, 0.5]}\n",
                                    &bin, "mem");
            }),
            errc::arity_mismatch);
  EXPECT_EQ(error_code([&] {
              parse_prediction_file("{\"model_id\": \"m\", \"classes\": [\"pos\", \"neg\"]}\n"
                                    "{\"id\": \"x\", \"probs\": [0.5, 0.5]}\n",
                                    &bin, "mem");
            }),
            errc::header_mismatch);
  EXPECT_EQ(error_code([&] {
              parse_prediction_file("{\"model_id\": \"m\", \"classes\": [\"negative\", \"positive\"]}\n"
                                    "{\"id\": \"x\", \"probs\": [0.9, 0.3]}\n",
                                    &bin, "mem");
            }),
            errc::row_mass_out_of_tolerance);
  EXPECT_EQ(error_code([&] {
              parse_prediction_file("{\"model_id\": \"m\", \"classes\": [\"negative\", \"positive\"]}\n", &bin, "mem");
            }),
            errc::empty_matrix);
  EXPECT_EQ(error_code([&] { parse_prediction_file("{\"model_id\": \"m\"\n", &bin, "mem"); }), errc::parse_error);
  EXPECT_EQ(error_code([] { load_predictions("/nonexistent/daft.jsonl", daft::testing::binary()); }), errc::io_error);
}

TEST(PredictionFile, StoreLoadIsBitExact) {
  daft::testing::temp_dir dir("store");
  std::mt19937_64 rng(31);
  for (std::size_t k : {2u, 3u, 7u}) {
    const auto p = daft::testing::random_matrix(rng, 64, k, "m" + std::to_string(k));
    const auto path = dir / ("m" + std::to_string(k) + ".jsonl");
    store_predictions(path, p);
    EXPECT_EQ(load_predictions(path, p.space()), p);
  }
}

TEST(Labels, RoundTrip) {
  daft::testing::temp_dir dir("labels");
  const few_shot_set set{{"a", "b", "c"}, {1, 0, 1}};
  write_labels(dir / "l.jsonl", set);
  const auto back = read_labels(dir / "l.jsonl");
  EXPECT_EQ(back.ids, set.ids);
  EXPECT_EQ(back.labels, set.labels);
}

TEST(SelectRows, ReordersAndReportsMissing) {
  const auto p = validate_prediction_matrix("m", {{0.1, 0.9}, {0.6, 0.4}}, daft::testing::binary(), {"x", "y"});
  const auto q = select_rows(p, {"y", "x"});
  EXPECT_EQ(q.data(), (std::vector<double>{0.6, 0.4, 0.1, 0.9}));
  EXPECT_EQ(q.ids(), (std::vector<std::string>{"y", "x"}));
  EXPECT_EQ(error_code([&] { select_rows(p, {"z"}); }), errc::missing_sample);
}

TEST(Weights, JsonRoundTrip) {
  const ensemble_weights w(2, 3, {0.1, -0.2, 0.3, 1.0 / 3.0, 0.5, 0.6}, {0.01, -0.02});
  const auto doc = weights_to_json(w);
  EXPECT_EQ(doc["format"], kWeightsFormat);
  EXPECT_EQ(weights_from_json(json::parse(doc.dump())), w);
  auto bad = doc;
  bad["format"] = "other/1";
  EXPECT_EQ(error_code([&] { weights_from_json(bad); }), errc::parse_error);
}

TEST(Forest, JsonRoundTrip) {
  std::mt19937_64 rng(32);
  std::vector<prediction_matrix> preds{daft::testing::random_matrix(rng, 30, 3), daft::testing::random_matrix(rng, 30, 3)};
  const few_shot_set shots{daft::testing::ids(30), daft::testing::random_labels(rng, 30, 3)};
  rf_config cfg;
  cfg.n_trees = 10;
  const auto forest = fit_rf(preds, shots, cfg);
  const auto back = forest_from_json(json::parse(forest_to_json(forest).dump()));
  EXPECT_EQ(back, forest);
}

TEST(Forest, RejectsBrokenTrees) {
  rf_model forest;
  forest.classes = 2;
  forest.models = 1;
  tree_node root;
  root.feature = 0;
  root.threshold = 0.5;
  root.left = 0;  // points back at itself
  root.right = 1;
  tree_node leaf;
  leaf.distribution = {0.5, 0.5};
  forest.trees = {decision_tree{{root, leaf}}};
  EXPECT_EQ(error_code([&] { forest_from_json(forest_to_json(forest)); }), errc::parse_error);
  forest.trees[0].nodes[0].left = 1;
  forest.trees[0].nodes[1].distribution = {1.0};
  EXPECT_EQ(error_code([&] { forest_from_json(forest_to_json(forest)); }), errc::parse_error);
}

TEST(Report, TextAndJson) {
  eval_report r;
  r.dataset = "toy";
  r.samples = 4;
  r.seed = 7;
  r.methods = {{"a", 0.5, 0.7}, {"daft-e-z", 1.0, 0.45}, {"majority-vote", 0.75, std::nullopt}};
  r.add_ri("a", "daft-e-z");
  EXPECT_EQ(error_code([&] { r.add_ri("a", "nobody"); }), errc::bad_config);
  const auto doc = report_to_json(r);
  EXPECT_EQ(doc["format"], kReportFormat);
  EXPECT_EQ(doc["metadata"]["seed"], 7);
  EXPECT_TRUE(doc["metadata"]["shots"].is_null());
  EXPECT_TRUE(doc["methods"][2]["cross_entropy"].is_null());
  EXPECT_EQ(doc["relative_improvement"][0]["ri_percent"], -50.0);
  const auto text = format_report_text(r);
  EXPECT_NE(text.find("majority-vote    0.750000              -"), std::string::npos) << text;
  EXPECT_NE(text.find("-50.0000"), std::string::npos);
}

TEST(Heatmap, Layout) {
  const auto csv = format_heatmap_csv({{"amazon", "yelp", 0.9},
                                       {"yelp", "amazon", 0.8},
                                       {"amazon", "amazon", 0.95},
                                       {"amazon", "yelp", 0.7}});
  EXPECT_EQ(csv, "source,yelp,amazon\namazon,0.800000,0.950000\nyelp,,0.800000\n");
}
