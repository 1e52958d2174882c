#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "asu/backends.hpp"
#include "asu/error.hpp"
#include "test_support.hpp"

// after Eigen: resolv.h defines a _res macro
#include <httplib.h>

namespace asu {
namespace {

using testing::TempDir;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an asu::Error";
  return ErrorCode::io;
}

/// Local stand-in for the generation, synthesis and encoder services.
class FakeServices {
 public:
  FakeServices() {
    server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto j = nlohmann::json::parse(req.body);
      last_generate = j;
      res.set_content(nlohmann::json{{"generated_text", "\"echo: " + j["inputs"].get<std::string>() + "\""}}.dump(),
                      "application/json");
    });
    server_.Post("/v1/synthesize", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto j = nlohmann::json::parse(req.body);
      Waveform w;
      w.sample_rate = 22050;
      w.samples = testing::tone(0.01 * static_cast<double>(j["text"].get<std::string>().size()), 200.0, 22050);
      const auto bytes = encode_wav_pcm16(w);
      res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
    });
    server_.Post("/v1/encode", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const auto j = nlohmann::json::parse(req.body);
      const auto n = j["samples"].size();
      const std::size_t frames = n < 400 ? 0 : 1 + (n - 400) / 320;
      nlohmann::json states = nlohmann::json::array();
      for (int l = 0; l < 2; ++l) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t t = 0; t < frames + 1; ++t) rows.push_back({l + 0.5, static_cast<double>(t), 1.0});
        states.push_back(rows);
      }
      res.set_content(nlohmann::json{{"hidden_states", states}}.dump(), "application/json");
    });
    server_.Post("/v1/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServices() {
    server_.stop();
    thread_.join();
  }

  BackendSpec spec() const { return {"http", fmt::format("http://127.0.0.1:{}/v1/", port_), 5}; }

  std::atomic<int> calls{0};
  nlohmann::json last_generate;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

 private:
  const char* name_;
};

TEST(HttpBackends, GenerationRequestShape) {
  FakeServices svc;
  HttpLlmBackend llm(svc.spec());
  LlmRequest req;
  req.prompt = "Generate a happy sentence";
  req.max_output_tokens = 32;
  req.temperature = 0.7;
  req.seed = 9;
  EXPECT_EQ(llm.generate(req), "\"echo: Generate a happy sentence\"");
  EXPECT_EQ(svc.last_generate["parameters"]["max_new_tokens"], 32);
  EXPECT_EQ(svc.last_generate["parameters"]["seed"], 9);
  EXPECT_EQ(svc.last_generate["parameters"]["do_sample"], true);
}

TEST(HttpBackends, TtsReplyDecodes) {
  FakeServices svc;
  HttpTtsBackend tts(svc.spec());
  const auto w = tts.synthesize("hello there", {"spk", {0.1, 0.2}});
  EXPECT_EQ(w.sample_rate, 22050);
  EXPECT_EQ(w.samples.size(), 2426U);  // round(0.11 * 22050)
}

TEST(HttpBackends, EncoderPadsAndMasks) {
  FakeServices svc;
  auto cfg = testing::tiny_encoder_config(2, 3);
  cfg.backend_id = "http";
  cfg.endpoint = svc.spec().endpoint;
  const auto enc = make_encoder(cfg);
  std::vector<float> audio(1000, 0.1F);
  audio.resize(2000, 0.0F);
  const auto stack = enc->encode(audio, 1000);
  EXPECT_EQ(stack.layers(), 2U);
  EXPECT_EQ(stack.frames(), cfg.frames_for(2000));
  EXPECT_EQ(stack.valid_frames(), cfg.frames_for(1000));
  EXPECT_EQ(stack.states[1](1, 0), 1.5);
  EXPECT_EQ(stack.states[1](1, 1), 1.0);
  EXPECT_EQ(stack.states[0].row(static_cast<Eigen::Index>(stack.frames()) - 1).norm(), 0.0);
  EXPECT_TRUE(enc->projections().empty());
  EXPECT_EQ(code_of([&] { apply_lora(enc, LoraConfig{}, 1); }), ErrorCode::unknown_target);
}

TEST(HttpBackends, CacheServesRepeatedRequests) {
  FakeServices svc;
  TempDir cache;
  ScopedEnv env(kBackendCacheEnv, cache.path().string());
  const auto a = http_post(svc.spec(), "/generate", R"({"inputs":"x"})");
  const auto b = http_post(svc.spec(), "/generate", R"({"inputs":"x"})");
  EXPECT_EQ(a, b);
  EXPECT_EQ(svc.calls.load(), 1);
  http_post(svc.spec(), "/generate", R"({"inputs":"y"})");
  EXPECT_EQ(svc.calls.load(), 2);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(cache.path())) files += e.path().extension() == ".bin";
  EXPECT_EQ(files, 2U);
}

TEST(HttpBackends, FailuresAreBackendErrors) {
  FakeServices svc;
  EXPECT_EQ(code_of([&] { http_post(svc.spec(), "/broken", "{}"); }), ErrorCode::backend_failure);
  EXPECT_EQ(code_of([] { http_post({"http", "http://127.0.0.1:1", 1}, "/generate", "{}"); }), ErrorCode::backend_failure);
  EXPECT_EQ(code_of([] { HttpLlmBackend({"http", "not a url", 1}); }), ErrorCode::invalid_config);
}

TEST(BackendFactories, StubAndUnknown) {
  EXPECT_NE(make_llm_backend({}), nullptr);
  EXPECT_NE(make_tts_backend({}), nullptr);
  EXPECT_EQ(code_of([] { make_llm_backend({"gpt", "", 1}); }), ErrorCode::invalid_config);
  EXPECT_EQ(code_of([] { make_tts_backend({"gpt", "", 1}); }), ErrorCode::invalid_config);
  auto cfg = testing::tiny_encoder_config();
  cfg.backend_id = "other";
  EXPECT_EQ(code_of([&] { make_encoder(cfg); }), ErrorCode::invalid_config);
}

}  // namespace
}  // namespace asu
