#pragma once

// Eigen must be parsed before httplib pulls in <resolv.h>, which defines _res.
#include "lfc/service.hpp"

#include <httplib.h>

namespace lfc {

/// Routes the session API of `manager` through `server`. The manager must
/// outlive the server.
inline void mount_api(httplib::Server& server, SessionManager& manager) {
  auto forward = [&manager](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = manager.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/kernels", forward);
  server.Get(R"(/sessions/.*)", forward);
  server.Post("/sessions", forward);
  server.Post(R"(/sessions/.*)", forward);
}

}  // namespace lfc
