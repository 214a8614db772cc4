#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "mtkit/http_backend.hpp"

using namespace mtkit::backend;

namespace {

// In-process mock server fixture.
struct ServerFixture {
  MockBackend mock{42};
  MockServer server{mock};
  std::thread thread;
  int port = 0;

  ServerFixture() {
    port = server.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ServerFixture() {
    server.stop();
    thread.join();
  }

  HttpBackendConfig config() const {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_attempts = 2;
    return cfg;
  }
};

}  // namespace

TEST_CASE("generate over the wire equals the in-process mock") {
  ServerFixture fx;
  HttpBackend client(fx.config());
  GenRequest req{"prompt\n\n\nhello there", SampleDecode{1.0}, 4, 64, "rq1"};
  auto remote = client.generate(req);
  auto local = fx.mock.generate(req);
  REQUIRE(remote.size() == 4);
  for (size_t i = 0; i < 4; ++i) CHECK(*remote[i].text == *local[i].text);
}

TEST_CASE("score and judge over the wire") {
  ServerFixture fx;
  HttpBackend client(fx.config());
  ScoreRequest req{"src", "hyp text", std::nullopt, "qe"};
  CHECK(client.score(req) == fx.mock.score(req));

  fx.mock.plant_spans("hyp text",
                      {{1, 4, mtkit::metrics::Severity::kMajor, "accuracy", "j"}});
  auto j = client.judge_spans(req);
  REQUIRE(j.spans.size() == 1);
  CHECK(j.spans[0].start == 1);
  CHECK(j.spans[0].end == 4);
}

TEST_CASE("validation errors surface as HTTP 400 -> TransportError") {
  ServerFixture fx;
  HttpBackend client(fx.config());
  GenRequest bad{"p", GreedyDecode{}, 1, 64, "rq2"};
  bad.num_samples = 3;  // greedy with >1 sample
  CHECK_THROWS_AS(client.generate(bad), TransportError);
}

TEST_CASE("unreachable backend exhausts retries") {
  HttpBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";  // discard port, nothing listening
  cfg.max_attempts = 2;
  cfg.initial_backoff = std::chrono::milliseconds(1);
  HttpBackend client(cfg);
  try {
    client.score({"s", "h", std::nullopt, "qe"});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(std::string(e.what()).find("retries exhausted") != std::string::npos);
  }
}

TEST_CASE("in-flight requests never exceed the configured cap") {
  ServerFixture fx;
  auto cfg = fx.config();
  cfg.max_in_flight = 3;
  HttpBackend client(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i)
    threads.emplace_back([&client, i] {
      client.score({"src " + std::to_string(i), "hyp", std::nullopt, "qe"});
    });
  for (auto& t : threads) t.join();
  CHECK(client.peak_in_flight() <= 3);
}

TEST_CASE("wire round-trip preserves request fields") {
  GenRequest req{"p", SampleDecode{0.7}, 5, 99, "id-1"};
  auto back = gen_request_from_wire(to_wire(req));
  CHECK(back.prompt == "p");
  CHECK(std::get<SampleDecode>(back.decode).temperature == 0.7);
  CHECK(back.num_samples == 5);
  CHECK(back.max_tokens == 99);
  CHECK(back.request_id == "id-1");

  ScoreRequest sr{"s", "h", std::string("r"), "chrf"};
  auto sback = score_request_from_wire(to_wire(sr));
  CHECK(sback.reference.has_value());
  CHECK(*sback.reference == "r");

  ScoreRequest qe{"s", "h", std::nullopt, "qe"};
  CHECK_FALSE(score_request_from_wire(to_wire(qe)).reference.has_value());
}

TEST_CASE("per-sample error slots survive the wire") {
  std::vector<SampleResult> samples{{std::string("ok"), {}},
                                    {std::nullopt, "refused"}};
  auto back = samples_from_wire(samples_to_wire(samples));
  REQUIRE(back.size() == 2);
  CHECK(back[0].ok());
  CHECK_FALSE(back[1].ok());
  CHECK(back[1].error == "refused");
}
