#pragma once

#include <httplib.h>

#include "xmego/service.hpp"

namespace xmego {

inline void apply(const HttpReply& r, httplib::Response& res) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

// Routes the service endpoints onto an httplib server.
inline void mount(httplib::Server& server, Service& service) {
  server.Post("/context", [&](const httplib::Request& req, httplib::Response& res) {
    apply(service.post_context(req.body), res);
  });
  server.Post("/query", [&](const httplib::Request& req, httplib::Response& res) {
    apply(service.post_query(req.body), res);
  });
  server.Post("/feedback", [&](const httplib::Request& req, httplib::Response& res) {
    apply(service.post_feedback(req.body), res);
  });
  server.Get(R"(/media/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    apply(service.get_media(req.matches[1]), res);
  });
}

}  // namespace xmego
