#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "eaas/bytes.hpp"

namespace eaas {

struct HttpReply {
  int status = 500;
  std::string content_type = "application/octet-stream";
  Bytes body;
  std::map<std::string, std::string> headers;

  // Error code carried in the body of non-200 replies ("malformed", "throttled", ...).
  std::string error_code() const { return status == 200 ? std::string{} : std::string(body.begin(), body.end()); }
};

// Client side of the transport. Implementations throw Error{Transport} when
// the server cannot be reached.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& path, ByteView body) = 0;
  virtual HttpReply get(const std::string& path) = 0;
};

// HTTP/1.1 over TCP via cpp-httplib. `base_url` like "http://127.0.0.1:8443".
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url, int timeout_s = 10);
  HttpReply post(const std::string& path, ByteView body) override;
  HttpReply get(const std::string& path) override;

 private:
  std::string base_url_;
  int timeout_s_;
};

}  // namespace eaas
