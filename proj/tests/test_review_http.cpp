#include <gtest/gtest.h>

#include <httplib.h>

#include <sstream>

#include "clid/review_server.hpp"
#include "support/review_rig.hpp"

using namespace clid;
using nlohmann::json;

namespace {

class ReviewHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    rig = std::make_unique<fixtures::ReviewRig>();
    server = std::make_unique<ReviewServer>(*rig->service, rig->h->snapshot);
    const int port = server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void TearDown() override {
    client.reset();
    server.reset();
    rig.reset();
  }

  httplib::Result post(const std::string& path, const std::string& body, httplib::Headers headers = {}) {
    return client->Post(path, headers, body, "application/json");
  }

  // Submits the fixture page and waits for its job; returns the item id.
  std::string analyzed_item() {
    const auto res = post("/analyze", json{{"title", "Éclair"}, {"text", fixtures::ReviewRig::kPage}, {"system", "rv"}}.dump());
    EXPECT_EQ(res->status, 202);
    const auto id = json::parse(res->body).at("job_id").get<std::string>();
    rig->service->wait(id);
    const auto job = json::parse(client->Get("/jobs/" + id)->body);
    EXPECT_EQ(job["status"], "completed");
    return job["item_ids"].at(0).get<std::string>();
  }

  std::unique_ptr<fixtures::ReviewRig> rig;
  std::unique_ptr<ReviewServer> server;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status_for(ErrorCode::not_found), 404);
  EXPECT_EQ(http_status_for(ErrorCode::conflict), 409);
  EXPECT_EQ(http_status_for(ErrorCode::invalid_argument), 400);
  EXPECT_EQ(http_status_for(ErrorCode::parse), 400);
  EXPECT_EQ(http_status_for(ErrorCode::pipeline), 500);
}

TEST_F(ReviewHttp, AnalyzeJobQueueItemVerdictExport) {
  const auto item_id = analyzed_item();

  auto res = client->Get("/queue");
  ASSERT_EQ(res->status, 200);
  auto q = json::parse(res->body)["items"];
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0]["item_id"], item_id);
  EXPECT_EQ(q[0]["highlight"]["start"], 23);
  EXPECT_EQ(q[0]["highlight"]["end"], 60);
  EXPECT_EQ(json::parse(client->Get("/queue?min_score=0.95")->body)["items"].size(), 0u);
  EXPECT_EQ(json::parse(client->Get("/queue?status=accepted")->body)["items"].size(), 0u);

  res = client->Get("/items/" + item_id);
  ASSERT_EQ(res->status, 200);
  const auto detail = json::parse(res->body);
  EXPECT_EQ(detail["fact"]["claim_text"], "Aldbury was founded in 1999 by monks.");
  ASSERT_FALSE(detail["evidence_passages"].empty());
  for (const auto& p : detail["evidence_passages"]) {
    EXPECT_TRUE(p.contains("title"));
    EXPECT_EQ(p["text"], rig->h->snapshot.at(p["block_id"].get<std::string>()).text);
  }

  res = post("/verdicts", json{{"item_id", item_id}, {"decision", "accept"}, {"note", "yes"}}.dump(),
             {{"X-Reviewer-Id", "alice"}});
  ASSERT_EQ(res->status, 200);
  const auto judged = json::parse(res->body);
  EXPECT_EQ(judged["status"], "accepted");
  EXPECT_EQ(judged["verdicts"][0]["reviewer_id"], "alice");
  EXPECT_EQ(judged["verdicts"][0]["note"], "yes");

  res = post("/verdicts", json{{"item_id", item_id}, {"decision", "reject"}}.dump(), {{"X-Reviewer-Id", "bob"}});
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["code"], "conflict");

  res = client->Get("/export/dataset");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/x-ndjson");
  std::istringstream in(res->body);
  const auto ds = read_dataset(in);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].gold_label, Label::inconsistent);
}

TEST_F(ReviewHttp, ErrorStatuses) {
  auto res = post("/analyze", "{not json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["stage"], "http");
  EXPECT_EQ(post("/analyze", json{{"text", "x"}}.dump())->status, 400);
  EXPECT_EQ(post("/analyze", json{{"title", "t"}, {"text", "x"}, {"system", "oracle"}}.dump())->status, 400);
  EXPECT_EQ(post("/analyze", json{{"title", "t"}, {"text", " "}}.dump())->status, 400);
  res = client->Get("/jobs/jmissing");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["code"], "not_found");
  EXPECT_EQ(client->Get("/items/imissing")->status, 404);
  EXPECT_EQ(client->Get("/queue?min_score=high")->status, 400);
  EXPECT_EQ(client->Get("/queue?status=maybe")->status, 400);
  EXPECT_EQ(post("/verdicts", json{{"item_id", "x"}, {"decision", "accept"}}.dump())->status, 400);
  EXPECT_EQ(post("/verdicts", json{{"item_id", "x"}, {"decision", "accept"}}.dump(), {{"X-Reviewer-Id", "a"}})->status,
            404);
  EXPECT_EQ(post("/verdicts", json{{"item_id", "x"}, {"decision", "perhaps"}}.dump(), {{"X-Reviewer-Id", "a"}})->status,
            400);
}

TEST_F(ReviewHttp, FailedJobCarriesError) {
  auto res = post("/analyze", json{{"title", "Broken"}, {"text", "UNPARSEABLE page."}}.dump());
  const auto id = json::parse(res->body)["job_id"].get<std::string>();
  rig->service->wait(id);
  const auto job = json::parse(client->Get("/jobs/" + id)->body);
  EXPECT_EQ(job["status"], "failed");
  EXPECT_EQ(job["error"]["code"], "extraction");
  EXPECT_EQ(job["error"]["stage"], "extraction");
}

TEST_F(ReviewHttp, CorsHeaders) {
  auto res = client->Get("/queue");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  res = client->Options("/verdicts");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Headers").find("X-Reviewer-Id"), std::string::npos);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}
