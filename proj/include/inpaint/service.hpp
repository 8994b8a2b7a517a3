#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "inpaint/imaging.hpp"
#include "inpaint/networks.hpp"

namespace inpaint {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Strict RFC 4648 alphabet with padding; throws ValidationError otherwise.
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

// Fills the masked pixels of an 8-bit image. The generator sees the
// normalized, corrupted image; its output is rounded to bytes and written
// only where the mask is set, so every other pixel is copied unchanged.
ImageTensor complete_image(const Generator& g, const ImageTensor& raw, const Mask& mask);

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  // Largest accepted height or width.
  int max_side = 4096;
};

// Request handling for the HTTP front end, usable without a socket. The
// model is read-only after construction; handlers may run concurrently.
class InpaintService {
 public:
  InpaintService(Generator generator, std::string model_id, ServiceOptions options = {});
  // Model id: first 16 hex digits of the checkpoint's SHA-256.
  static InpaintService from_checkpoint(const std::filesystem::path& path, ServiceOptions options = {});

  const std::string& model_id() const { return model_id_; }
  const Generator& generator() const { return generator_; }

  // {"image": b64 PNG, "mask": b64 PNG, "options": {"checkpoint": id}?}
  // -> {"image": b64 PNG, "model": id}
  HttpResponse handle_inpaint(const std::string& body) const;
  // {"status", "model", "levels", "receptive_field"}
  HttpResponse handle_health() const;

 private:
  const Generator generator_;
  const std::string model_id_;
  const ServiceOptions options_;
  const int receptive_field_;
};

// HTTP front end: POST /inpaint and GET /health over a shared service.
class ServiceServer {
 public:
  explicit ServiceServer(const InpaintService& service);
  ~ServiceServer();
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace inpaint
