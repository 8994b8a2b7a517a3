#include "inpaint/service.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "inpaint/checkpoint.hpp"
#include "inpaint/errors.hpp"
#include "inpaint/image_io.hpp"

namespace inpaint {

namespace {

// Request-level failure mapped to an HTTP status and a field path.
struct RequestError {
  int status;
  std::string field;
  std::string message;
};

HttpResponse error_response(const RequestError& e) {
  nlohmann::json body = {{"error", {{"field", e.field}, {"message", e.message}}}};
  return {e.status, body.dump()};
}

bool valid_base64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
         c == '/';
}

// Width and height from a PNG IHDR chunk, when the bytes look like a PNG.
std::optional<std::pair<std::uint32_t, std::uint32_t>> png_size(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (b.size() < 24 || !std::equal(kSig, kSig + 8, b.begin())) return std::nullopt;
  auto be32 = [&](std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
  };
  return std::pair{be32(16), be32(20)};
}

std::vector<std::uint8_t> field_bytes(const nlohmann::json& body, const char* key) {
  const std::string field = std::string("/") + key;
  if (!body.contains(key)) throw RequestError{400, field, "required field missing"};
  if (!body[key].is_string()) throw RequestError{400, field, "expected a base64 string"};
  try {
    return base64_decode(body[key].get<std::string>());
  } catch (const ValidationError& e) {
    throw RequestError{400, field, e.what()};
  }
}

void check_size(std::span<const std::uint8_t> bytes, const std::string& field, int max_side) {
  if (const auto s = png_size(bytes)) {
    if (s->first > static_cast<std::uint32_t>(max_side) || s->second > static_cast<std::uint32_t>(max_side)) {
      throw RequestError{413, field,
                         std::to_string(s->first) + "x" + std::to_string(s->second) + " exceeds the " +
                             std::to_string(max_side) + "x" + std::to_string(max_side) + " limit"};
    }
  }
}

void check_decoded_size(int h, int w, const std::string& field, int max_side) {
  if (h > max_side || w > max_side) {
    throw RequestError{413, field,
                       std::to_string(w) + "x" + std::to_string(h) + " exceeds the " + std::to_string(max_side) +
                           "x" + std::to_string(max_side) + " limit"};
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ValidationError("base64 length must be a multiple of 4");
  std::size_t pad = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) throw ValidationError("base64 padding in the middle of the data");
      ++pad;
    } else if (pad > 0 || !valid_base64_char(c)) {
      throw ValidationError("invalid base64 character at offset " + std::to_string(i));
    }
  }
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("malformed base64 data");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 15];
  }
  return hex;
}

ImageTensor complete_image(const Generator& g, const ImageTensor& raw, const Mask& mask) {
  if (raw.range() != RangeTag::kRaw || raw.channels() != 3) {
    throw ValidationError("complete_image: expected an 8-bit RGB image");
  }
  if (mask.height() != raw.height() || mask.width() != raw.width()) {
    throw ValidationError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                          " but the image is " + std::to_string(raw.width()) + "x" +
                          std::to_string(raw.height()));
  }
  g.check_input(Shape{1, 4, raw.height(), raw.width()});
  const Corrupted c = corrupt(normalize(raw), mask);
  const ImageTensor generated = denormalize(from_nchw(g.generate(to_nchw(c.input4)), 0, RangeTag::kSigned));
  ImageTensor out = raw;
  for (int y = 0; y < raw.height(); ++y) {
    for (int x = 0; x < raw.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int ch = 0; ch < 3; ++ch) out.set(y, x, ch, std::round(generated.at(y, x, ch)));
    }
  }
  return out;
}

InpaintService::InpaintService(Generator generator, std::string model_id, ServiceOptions options)
    : generator_(std::move(generator)),
      model_id_(std::move(model_id)),
      options_(options),
      receptive_field_(compute_receptive_field(generator_.spec()).size) {}

InpaintService InpaintService::from_checkpoint(const std::filesystem::path& path, ServiceOptions options) {
  Generator g = load_generator(path);
  return InpaintService(std::move(g), file_sha256(path).substr(0, 16), options);
}

HttpResponse InpaintService::handle_health() const {
  nlohmann::json body = {{"status", "ok"},
                         {"model", model_id_},
                         {"levels", generator_.spec().levels},
                         {"receptive_field", receptive_field_}};
  return {200, body.dump()};
}

HttpResponse InpaintService::handle_inpaint(const std::string& text) const {
  try {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      throw RequestError{400, "", "request body is not valid JSON"};
    }
    if (!body.is_object()) throw RequestError{400, "", "request body must be a JSON object"};
    if (body.contains("options")) {
      const auto& o = body["options"];
      if (!o.is_object()) throw RequestError{400, "/options", "expected an object"};
      if (o.contains("checkpoint")) {
        if (!o["checkpoint"].is_string() || o["checkpoint"].get<std::string>() != model_id_) {
          throw RequestError{400, "/options/checkpoint", "this service only serves model " + model_id_};
        }
      }
    }
    const auto image_bytes = field_bytes(body, "image");
    const auto mask_bytes = field_bytes(body, "mask");
    check_size(image_bytes, "/image", options_.max_side);
    check_size(mask_bytes, "/mask", options_.max_side);

    ImageTensor image;
    Mask mask;
    try {
      image = decode_image(image_bytes);
    } catch (const LoadError&) {
      throw RequestError{400, "/image", "not a decodable PNG or JPEG image"};
    }
    check_decoded_size(image.height(), image.width(), "/image", options_.max_side);
    try {
      mask = decode_mask(mask_bytes);
    } catch (const LoadError&) {
      throw RequestError{400, "/mask", "not a decodable single-channel PNG"};
    }
    check_decoded_size(mask.height(), mask.width(), "/mask", options_.max_side);
    if (mask.height() != image.height() || mask.width() != image.width()) {
      throw RequestError{400, "/mask",
                         "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                             " but the image is " + std::to_string(image.width()) + "x" +
                             std::to_string(image.height())};
    }
    ImageTensor result;
    try {
      result = complete_image(generator_, image, mask);
    } catch (const ResolutionError& e) {
      throw RequestError{400, "/image", e.what()};
    }
    nlohmann::json out = {{"image", base64_encode(encode_png(result))}, {"model", model_id_}};
    return {200, out.dump()};
  } catch (const RequestError& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return error_response({500, "", e.what()});
  }
}

struct ServiceServer::Impl {
  explicit Impl(const InpaintService& s) : service(s) {}
  const InpaintService& service;
  httplib::Server server;
};

ServiceServer::ServiceServer(const InpaintService& service)
    : impl_(std::make_unique<Impl>(service)) {
  auto& s = impl_->server;
  // Base64 inflates by 4/3; a 4096^2 RGB PNG can approach 50 MB encoded.
  s.set_payload_max_length(std::size_t{256} << 20);
  s.Post("/inpaint", [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = impl_->service.handle_inpaint(req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const HttpResponse r = impl_->service.handle_health();
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string message = res.status == 413 ? "request body too large" : "no such endpoint";
    res.set_content(nlohmann::json{{"error", {{"field", ""}, {"message", message}}}}.dump(),
                    "application/json");
  });
}

ServiceServer::~ServiceServer() { stop(); }

int ServiceServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void ServiceServer::listen() { impl_->server.listen_after_bind(); }

void ServiceServer::stop() { impl_->server.stop(); }

}  // namespace inpaint
