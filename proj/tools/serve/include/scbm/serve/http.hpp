#pragma once

#include <memory>
#include <string>

#include "scbm/serve/service.hpp"

namespace httplib {
class Server;
}

namespace scbm::serve {

/// HTTP status for an error kind: not_found 404, conflict 409, usage/config
/// 400, busy 503, anything else 500.
int status_for(const std::string& kind);

/// Binds the documented endpoints to a Service. The service must outlive the server.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Returns the bound port; port 0 picks a free one. Throws IoError on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  Service& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace scbm::serve
