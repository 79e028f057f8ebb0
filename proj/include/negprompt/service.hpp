// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "negprompt/dataengine.hpp"
#include "negprompt/detector.hpp"

namespace negprompt {

/// HTTP-independent request handling. Holds one immutable model snapshot and
/// the scene corpus; every call is a pure function of its request.
class InferenceService {
 public:
  InferenceService(Checkpoint checkpoint, Dataset data, double default_beta = 0.3,
                   std::string model_version = "negprompt-1");

  /// {scenes: [{id, width, height, split}]}.
  nlohmann::json scenes() const;
  /// The scene's pixel payload (see encode_pixels). Throws NotFoundError.
  std::string scene_image(int id) const;
  /// {config, dim, k, beta, model_version}.
  nlohmann::json model_info() const;

  /// Request: {scene_id | pixels: {width, height, data}, positives:
  /// [{category_name, box: [x, y, w, h]}], negatives: [{box}], mode, beta, k,
  /// score_threshold, seed, include_timing}. Response: {detections: [{box,
  /// category_name, probability, suppressed_delta, query}], model_version}
  /// plus timing_ms when requested. Throws ValidationError / NotFoundError /
  /// MissingNegativesError / EncodeError on bad input.
  nlohmann::json infer(const nlohmann::json& request) const;

 private:
  Checkpoint ckpt_;
  Dataset data_;
  double beta_;
  std::string version_;
};

/// Handle to a running HTTP server.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<const InferenceService> service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `host:port` (port 0 picks a free port) and returns the bound port.
  /// Throws Error when binding fails.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads both artifacts (failing fast on a bad checkpoint) and serves
/// forever on `address` ("host:port").
void serve(const std::string& checkpoint_path, const std::string& dataset_dir, const std::string& address,
           const std::function<void(int)>& on_ready = {});

}  // namespace negprompt
