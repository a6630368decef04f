#pragma once

#include <memory>
#include <string>

#include "trade/session.hpp"

namespace trade::session {

/// HTTP/JSON front end over a SessionService.
class ApiServer {
 public:
  explicit ApiServer(SessionService& service);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Blocks until stop().
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it (or -1); serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace trade::session
