// Copyright 2026 the dsra authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

// HTTP/1.1 front end: the same wire interface actors speak in-process,
// carried over sockets. Bodies pass through both directions untouched, so an
// actor's bytes are transport-independent by construction. Plain HTTP only;
// TLS termination is out of scope.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "dsra/actors.hpp"
#include "dsra/errors.hpp"

namespace dsra {

/// Delivery over HTTP. Peers resolve from actor id to base URL; each call
/// uses a fresh connection, so no connection state can differ between runs.
class HttpTransport final : public Transport {
 public:
  void add_peer(const std::string& actor_id, const std::string& url) {
    urls_[actor_id] = url;
  }

 protected:
  WireReply roundtrip(const std::string& to,
                      const WireRequest& request) override {
    auto it = urls_.find(to);
    if (it == urls_.end())
      throw ConfigError("unresolvable peer '" + to + "'");
    httplib::Client client(it->second);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);
    client.set_keep_alive(false);
    httplib::Result result =
        request.method == "POST"
            ? client.Post(request.path, request.body, "application/json")
            : client.Get(request.path);
    if (!result)
      throw ConfigError("peer '" + to + "' unreachable over http: " +
                        httplib::to_string(result.error()));
    return WireReply{result->status, result->body};
  }

 private:
  std::map<std::string, std::string> urls_;
};

/// One listening actor. Every request reduces to the actor's handle() --
/// the server adds no headers that matter and never inspects bodies.
class ActorServer {
 public:
  ActorServer() = default;
  ActorServer(const ActorServer&) = delete;
  ActorServer& operator=(const ActorServer&) = delete;
  ~ActorServer() { stop(); }

  /// Bind `listen` ("host:port", port 0 picks a free one) and serve on a
  /// background thread. Throws BindFailure when the address is taken.
  void start(Actor& actor, const std::string& listen) {
    actor_ = &actor;
    size_t colon = listen.rfind(':');
    if (colon == std::string::npos)
      throw ConfigError("listen must be host:port, got '" + listen + "'");
    host_ = listen.substr(0, colon);
    int port = std::stoi(listen.substr(colon + 1));

    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      WireReply reply =
          actor_->handle(WireRequest{req.method, req.path, req.body});
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    };
    server_.Post(R"(/.*)", route);
    server_.Get(R"(/.*)", route);
    // Fast restarts are fine, but two live actors must never share a port:
    // keep SO_REUSEADDR, drop the library default's SO_REUSEPORT.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                 reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    if (port == 0) {
      port_ = server_.bind_to_any_port(host_);
      if (port_ < 0) throw BindFailure("cannot bind " + listen);
    } else {
      if (!server_.bind_to_port(host_, port))
        throw BindFailure("cannot bind " + listen);
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  /// Stop serving and flush the actor's persistent state.
  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
      if (actor_) actor_->persist();
    }
  }

  int port() const { return port_; }
  std::string url() const {
    return "http://" + host_ + ":" + std::to_string(port_);
  }

 private:
  Actor* actor_ = nullptr;
  httplib::Server server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace dsra
