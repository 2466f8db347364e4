#pragma once

// Eigen must precede httplib: <resolv.h> defines a _res macro.
#include "earnsig/insight/labeler.hpp"

#include <httplib.h>

#include <chrono>
#include <nlohmann/json.hpp>
#include <string>

namespace earnsig::insight {

// POST {"items": [...], "categories": [...]} to base_url + path and read back
// a JSON object item -> category.
class HttpLabeler : public Labeler {
 public:
  HttpLabeler(std::string base_url, std::string path = "/label", std::chrono::seconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)), path_(std::move(path)), timeout_(timeout) {}

  std::string id() const override { return "http:" + base_url_ + path_; }

  LabelMap label(const std::vector<std::string>& items, const std::vector<std::string>& categories) override {
    httplib::Client client(base_url_);
    if (!client.is_valid()) throw Error(ErrorCode::ConfigInvalid, "labeler url '" + base_url_ + "' is not usable");
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    const nlohmann::json body{{"items", items}, {"categories", categories}};
    auto res = client.Post(path_.c_str(), body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::LabelerUnavailable, id() + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::LabelerUnavailable, id() + ": HTTP " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body).get<LabelMap>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::LabelerUnavailable, id() + ": malformed response: " + e.what());
    }
  }

 private:
  std::string base_url_;
  std::string path_;
  std::chrono::seconds timeout_;
};

}  // namespace earnsig::insight
