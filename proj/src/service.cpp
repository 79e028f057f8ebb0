// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/service.hpp"

#include <chrono>
#include <map>

#include <httplib.h>

#include "negprompt/errors.hpp"
#include "negprompt/numcore/ops.hpp"
#include "negprompt/scoring.hpp"

namespace negprompt {

namespace {

using nlohmann::json;

BBox parse_box(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError(std::string(what) + " box must be [x, y, w, h]");
  for (const auto& v : j)
    if (!v.is_number()) throw ValidationError(std::string(what) + " box must be numeric");
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!(b.w > 0 && b.h > 0)) throw ValidationError(std::string(what) + " box needs positive size");
  return b;
}

void check_inside(const BBox& b, std::size_t w, std::size_t h) {
  if (b.x < 0 || b.y < 0 || b.x + b.w > static_cast<double>(w) || b.y + b.h > static_cast<double>(h))
    throw ValidationError("box lies outside the image");
}

template <typename T>
T field(const json& req, const char* name, T fallback) {
  if (!req.contains(name) || req[name].is_null()) return fallback;
  try {
    return req[name].get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

InferenceService::InferenceService(Checkpoint checkpoint, Dataset data, double default_beta, std::string version)
    : ckpt_(std::move(checkpoint)), data_(std::move(data)), beta_(default_beta), version_(std::move(version)) {}

json InferenceService::scenes() const {
  json rows = json::array();
  for (const auto& s : data_.scenes)
    rows.push_back({{"id", s.image_id}, {"width", s.width}, {"height", s.height},
                    {"split", s.validation ? "val" : "train"}});
  return {{"scenes", rows}};
}

std::string InferenceService::scene_image(int id) const { return encode_pixels(data_.scene(id).pixels); }

json InferenceService::model_info() const {
  return {{"config", json::parse(model_config_json(ckpt_.model))},
          {"dim", ckpt_.model.dim},
          {"k", ckpt_.model.k},
          {"beta", beta_},
          {"model_version", version_}};
}

json InferenceService::infer(const json& req) const {
  const auto t0 = std::chrono::steady_clock::now();
  if (!req.is_object()) throw ValidationError("request must be a JSON object");
  const ModelConfig& mc = ckpt_.model;
  const PromptEncoderConfig pcfg = mc.prompt_config();

  Tensor pixels;
  if (req.contains("scene_id")) {
    pixels = data_.scene(field<int>(req, "scene_id", 0)).pixels;
  } else if (req.contains("pixels")) {
    const json& p = req["pixels"];
    const auto w = field<std::size_t>(p, "width", 0), h = field<std::size_t>(p, "height", 0);
    const auto values = field<std::vector<double>>(p, "data", {});
    if (w != mc.image_size || h != mc.image_size || values.size() != mc.in_channels * w * h)
      throw ValidationError("inline pixels must be " + std::to_string(mc.in_channels) + "x" +
                            std::to_string(mc.image_size) + "x" + std::to_string(mc.image_size));
    pixels = Tensor({mc.in_channels, h, w}, values);
  } else {
    throw ValidationError("request needs scene_id or pixels");
  }
  const std::size_t W = pixels.dim(2), H = pixels.dim(1);

  const InferenceMode mode = [&] {
    try {
      return parse_inference_mode(field<std::string>(req, "mode", "auto_suggested"));
    } catch (const Error& e) {
      throw ValidationError(e.what());
    }
  }();
  const double beta = field<double>(req, "beta", beta_);
  if (!(beta >= 0 && beta < 1)) throw ValidationError("beta must lie in [0, 1)");
  const double threshold = field<double>(req, "score_threshold", 0.0);
  const auto seed = field<std::uint64_t>(req, "seed", 0);
  std::size_t k = field<std::size_t>(req, "k", mc.k);

  // Positives grouped by category name, in order of first appearance.
  if (!req.contains("positives") || !req["positives"].is_array() || req["positives"].empty())
    throw ValidationError("at least one positive prompt is required");
  std::vector<std::string> names;
  std::map<std::string, std::vector<BBox>> boxes_of;
  for (const auto& p : req["positives"]) {
    const std::string name = field<std::string>(p, "category_name", "");
    if (name.empty()) throw ValidationError("positive prompt needs category_name");
    const BBox b = parse_box(p.contains("box") ? p["box"] : json(), "positive");
    check_inside(b, W, H);
    if (!boxes_of.count(name)) names.push_back(name);
    boxes_of[name].push_back(b);
  }
  std::vector<BBox> user_negs;
  if (req.contains("negatives")) {
    if (!req["negatives"].is_array()) throw ValidationError("negatives must be a list");
    for (const auto& n : req["negatives"]) {
      user_negs.push_back(parse_box(n.contains("box") ? n["box"] : json(), "negative"));
      check_inside(user_negs.back(), W, H);
    }
  }
  if (mode == InferenceMode::user_curated && user_negs.empty())
    throw MissingNegativesError("user_curated mode needs at least one negative box");

  Tape tape(false);
  const FeaturePyramid pyr = encode_image(tape, pixels, ckpt_.params, mc);
  const std::size_t m = names.size();
  PromptBank bank;
  bank.dim = mc.dim;
  bank.positives = Tensor({m, mc.dim});
  std::vector<Var> pos_rows;
  std::vector<std::vector<std::size_t>> groups;
  std::size_t row = 0;
  for (std::size_t c = 0; c < m; ++c) {
    bank.category_ids.push_back(static_cast<int>(c));
    pos_rows.push_back(encode_prompts(tape, pyr, boxes_of[names[c]], Polarity::positive, ckpt_.params, pcfg));
    groups.emplace_back();
    for (std::size_t i = 0; i < boxes_of[names[c]].size(); ++i) groups.back().push_back(row++);
  }
  const Tensor vp = aggregate_positives(pos_rows.size() == 1 ? pos_rows[0] : ad::concat_rows(pos_rows), groups).value();
  bank.positives = vp;

  InferenceMode effective = mode;
  std::vector<Tensor> pools(m);
  if (mode == InferenceMode::auto_suggested && k > 0 && mc.k > 0) {
    Rng rng = make_stream(seed, "request");
    const JitterSpec spec = JitterSpec::negative();
    for (std::size_t c = 0; c < m; ++c) {
      std::vector<BBox> jit;
      for (const BBox& b : boxes_of[names[c]])
        for (std::size_t i = 0; i < mc.k; ++i)
          jit.push_back(jitter_box(b, spec, static_cast<double>(W), static_cast<double>(H), rng));
      pools[c] = encode_prompts(tape, pyr, jit, Polarity::negative, ckpt_.params, pcfg).value();
    }
    k = std::min(k, boxes_of[names[0]].size() * mc.k);
    for (std::size_t c = 1; c < m; ++c) k = std::min(k, boxes_of[names[c]].size() * mc.k);
  } else if (mode == InferenceMode::user_curated) {
    if (mc.k == 0) throw ValidationError("model has no negative prompt queries");
    const Tensor shared = encode_prompts(tape, pyr, user_negs, Polarity::negative, ckpt_.params, pcfg).value();
    for (auto& p : pools) p = shared;
    k = std::min(k == 0 ? user_negs.size() : k, user_negs.size());
  } else {
    effective = InferenceMode::positive_only;
    k = 0;
  }
  if (effective != InferenceMode::positive_only) {
    bank.k = k;
    bank.negatives = Tensor({m * k, mc.dim});
    for (std::size_t c = 0; c < m; ++c) {
      const Tensor sel = select_topk_negatives(tape.constant(pools[c]), vp.row(c), k).value();
      std::copy(sel.storage().begin(), sel.storage().end(),
                bank.negatives.storage().begin() + static_cast<std::ptrdiff_t>(c * k * mc.dim));
    }
  }

  const Prediction pred = predict(pixels, ckpt_.params, mc);
  InferOptions io;
  io.mode = effective;
  io.beta = beta;
  io.score_threshold = threshold;
  json dets = json::array();
  for (const Detection& d : infer_detections(pred.queries, pred.boxes, bank, io)) {
    const BBox b = from_cxcywh_norm(d.box, static_cast<double>(W), static_cast<double>(H));
    dets.push_back({{"box", {b.x, b.y, b.w, b.h}},
                    {"category_name", names[static_cast<std::size_t>(d.category_id)]},
                    {"probability", d.probability},
                    {"suppressed_delta", effective == InferenceMode::positive_only
                                             ? 0.0
                                             : d.probability_positive_only - d.probability},
                    {"query", d.query}});
  }
  json out{{"detections", dets}, {"model_version", version_}, {"mode", to_string(mode)}};
  if (field<bool>(req, "include_timing", false))
    out["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ----------------------------------------------------------------------------

struct HttpServer::Impl {
  std::shared_ptr<const InferenceService> service;
  httplib::Server server;
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const NotFoundError& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "malformed_request", e.what());
  } catch (const Error& e) {
    send_error(res, 400, "invalid_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<const InferenceService> service) : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto& srv = impl_->server;
  auto svc = impl_->service;
  srv.Get("/scenes", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(svc->scenes().dump(), "application/json"); });
  });
  srv.Get(R"(/scenes/(-?\d+)/image)", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(svc->scene_image(std::stoi(req.matches[1].str())), "application/octet-stream");
    });
  });
  srv.Get("/model/info", [svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(svc->model_info().dump(), "application/json"); });
  });
  srv.Post("/infer", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto t0 = std::chrono::steady_clock::now();
      const json body = svc->infer(json::parse(req.body));
      res.set_header("X-Timing-Ms",
                     std::to_string(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()));
      res.set_content(body.dump(), "application/json");
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void serve(const std::string& checkpoint_path, const std::string& dataset_dir, const std::string& address,
           const std::function<void(int)>& on_ready) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ValidationError("bind address must be host:port");
  const std::string host = address.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("bad port in '" + address + "'");
  }
  auto svc = std::make_shared<const InferenceService>(load_checkpoint(checkpoint_path), load_dataset(dataset_dir));
  HttpServer server(svc);
  const int bound = server.bind(host, port);
  if (on_ready) on_ready(bound);
  server.listen();
}

}  // namespace negprompt
