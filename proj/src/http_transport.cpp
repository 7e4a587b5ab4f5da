#include <httplib.h>

#include "eaas/error.hpp"
#include "eaas/http.hpp"

namespace eaas {

namespace {

HttpReply convert(const httplib::Result& res, const std::string& what) {
  if (!res) throw Error(Errc::Transport, what + ": " + httplib::to_string(res.error()));
  HttpReply r;
  r.status = res->status;
  r.body = to_bytes(res->body);
  r.content_type = res->get_header_value("Content-Type");
  for (const auto& [k, v] : res->headers) r.headers[k] = v;
  return r;
}

}  // namespace

HttpTransport::HttpTransport(std::string base_url, int timeout_s) : base_url_(std::move(base_url)), timeout_s_(timeout_s) {}

HttpReply HttpTransport::post(const std::string& path, ByteView body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_s_);
  client.set_read_timeout(timeout_s_);
  std::string payload(body.begin(), body.end());
  return convert(client.Post(path, payload, "application/octet-stream"), "POST " + path);
}

HttpReply HttpTransport::get(const std::string& path) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_s_);
  client.set_read_timeout(timeout_s_);
  return convert(client.Get(path), "GET " + path);
}

}  // namespace eaas
