#pragma once

#include <charconv>
#include <cstdint>
#include <deque>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <json.hpp>  // nlohmann/json, vendored

#include "haptic/config.hpp"
#include "haptic/error.hpp"
#include "haptic/live.hpp"

namespace haptic {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kPreviewLimit = 50000;

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class BindError : public Error {
 public:
  using Error::Error;
};

struct SetHipMsg {
  Point3 position;
};
struct SetTransformMsg {
  std::vector<TransformOp> ops;
};
struct SetFrictionMsg {
  FrictionParams params;
};
struct ResetMsg {};
using ClientMessage = std::variant<SetHipMsg, SetTransformMsg, SetFrictionMsg, ResetMsg>;

namespace detail {

inline Vec3 read_triplet(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (!it->is_array() || it->size() != 3) throw ProtocolError(std::string("'") + key + "' must be [x, y, z]");
  Vec3 v;
  for (int n = 0; n < 3; ++n) {
    if (!(*it)[n].is_number()) throw ProtocolError(std::string("'") + key + "' must hold numbers");
    (n == 0 ? v.x : n == 1 ? v.y : v.z) = (*it)[n].get<double>();
  }
  return v;
}

inline double read_number(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  if (!it->is_number()) throw ProtocolError(std::string("'") + key + "' must be a number");
  return it->get<double>();
}

inline void only_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ProtocolError("unknown field '" + k + "'");
  }
}

inline nlohmann::ordered_json preview_json(const VoxelLattice& lattice) {
  auto flat = nlohmann::ordered_json::array();
  for (const auto& p : decimated_means(lattice, kPreviewLimit)) {
    flat.push_back(p.x);
    flat.push_back(p.y);
    flat.push_back(p.z);
  }
  return flat;
}

inline nlohmann::ordered_json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

}  // namespace detail

/// Decodes one inbound frame. Throws ProtocolError with a reason that is safe
/// to echo back to the client.
inline ClientMessage parse_client_message(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("message is not valid JSON");
  }
  if (!j.is_object()) throw ProtocolError("message must be a JSON object");
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw ProtocolError("message needs a string 'type'");
  const auto kind = type->get<std::string>();

  if (kind == "set_hip") {
    detail::only_keys(j, {"type", "position"});
    const Vec3 p = detail::read_triplet(j, "position");
    if (!is_finite(p)) throw ProtocolError("position must be finite");
    return SetHipMsg{p};
  }
  if (kind == "set_transform") {
    detail::only_keys(j, {"type", "ops"});
    if (!j.contains("ops")) throw ProtocolError("missing field 'ops'");
    try {
      return SetTransformMsg{detail::parse_transform_ops(j["ops"], "ops")};
    } catch (const ConfigError& e) {
      throw ProtocolError(e.what());
    }
  }
  if (kind == "set_friction") {
    detail::only_keys(j, {"type", "enabled", "mu_s", "mu_d"});
    FrictionParams f;
    f.enabled = true;
    if (j.contains("enabled")) {
      if (!j["enabled"].is_boolean()) throw ProtocolError("'enabled' must be a boolean");
      f.enabled = j["enabled"].get<bool>();
    }
    f.mu_s = detail::read_number(j, "mu_s");
    f.mu_d = detail::read_number(j, "mu_d");
    try {
      f.validate();
    } catch (const ConfigError& e) {
      throw ProtocolError(e.what());
    }
    return SetFrictionMsg{f};
  }
  if (kind == "reset") {
    detail::only_keys(j, {"type"});
    return ResetMsg{};
  }
  throw ProtocolError("unknown message type '" + kind + "'");
}

inline std::string hello_message(const EngineConfig& config, const LatticeView& view) {
  nlohmann::ordered_json j;
  j["type"] = "hello";
  j["protocol"] = kProtocolVersion;
  j["config"] = to_json(config);
  const auto& lc = view.lattice->config();
  j["lattice"] = {{"dims", {lc.dims[0], lc.dims[1], lc.dims[2]}},
                  {"spacing_m", lc.spacing},
                  {"origin_m", detail::vec_json(lc.origin)}};
  j["generation"] = view.generation;
  j["active_voxels"] = view.lattice->size();
  j["discarded"] = view.lattice->discarded();
  j["preview"] = detail::preview_json(*view.lattice);
  return j.dump();
}

inline std::string cloud_message(const LatticeView& view) {
  nlohmann::ordered_json j;
  j["type"] = "cloud";
  j["generation"] = view.generation;
  j["active_voxels"] = view.lattice->size();
  j["discarded"] = view.lattice->discarded();
  auto ops = nlohmann::ordered_json::array();
  for (const auto& op : view.transforms) ops.push_back(detail::transform_op_to_json(op));
  j["transforms"] = ops;
  j["preview"] = detail::preview_json(*view.lattice);
  return j.dump();
}

inline std::string snapshot_message(const WireSnapshot& w) {
  nlohmann::ordered_json j;
  j["type"] = "snapshot";
  const auto fields = to_json(w.snapshot);
  for (const auto& [k, v] : fields.items()) j[k] = v;
  j["normal"] = w.normal ? detail::vec_json(*w.normal) : nlohmann::ordered_json(nullptr);
  j["generation"] = w.generation;
  return j.dump();
}

inline std::string error_message(std::string_view reason) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["message"] = reason;
  return j.dump();
}

/// "host:port"; host may be an IPv4 or bracketed IPv6 literal.
inline boost::asio::ip::tcp::endpoint parse_bind_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw ConfigError("bind address must be host:port");
  std::string_view host = text.substr(0, colon);
  const std::string_view port_text = text.substr(colon + 1);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  unsigned port = 0;
  const auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || p != port_text.data() + port_text.size() || port > 65535)
    throw ConfigError("invalid port in bind address '" + std::string(text) + "'");
  boost::system::error_code bad;
  const auto address = boost::asio::ip::make_address(std::string(host), bad);
  if (bad) throw ConfigError("invalid host in bind address '" + std::string(text) + "'");
  return {address, static_cast<unsigned short>(port)};
}

class BridgeServer;

class ClientConnection : public std::enable_shared_from_this<ClientConnection> {
 public:
  ClientConnection(boost::asio::ip::tcp::socket socket, BridgeServer& server, std::size_t capacity)
      : ws_(std::move(socket)), server_(server), capacity_(capacity == 0 ? 1 : capacity) {}

  void start();

  /// Queues a text frame. When the queue is full the oldest frame not yet
  /// on the wire is dropped.
  void send(std::shared_ptr<const std::string> frame) {
    if (closed_) return;
    if (outbox_.size() >= capacity_) {
      const auto victim = writing_ ? std::next(outbox_.begin()) : outbox_.begin();
      if (victim != outbox_.end()) {
        outbox_.erase(victim);
        ++dropped_;
      }
    }
    outbox_.push_back(std::move(frame));
    if (!writing_) write_next();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ignored;
    boost::beast::get_lowest_layer(ws_).socket().shutdown(boost::asio::ip::tcp::socket::shutdown_both, ignored);
    boost::beast::get_lowest_layer(ws_).close();
  }

  std::uint64_t dropped() const { return dropped_; }

 private:
  void on_accept(boost::beast::error_code ec);
  void read();
  void on_read(boost::beast::error_code ec, std::size_t);
  void write_next();
  void on_write(boost::beast::error_code ec, std::size_t);
  void fail();

  boost::beast::websocket::stream<boost::beast::tcp_stream> ws_;
  BridgeServer& server_;
  std::size_t capacity_;
  boost::beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  bool writing_ = false;
  bool closed_ = false;
  std::uint64_t dropped_ = 0;
};

/// WebSocket endpoint for one live session. All network work runs on the
/// threads driving `io`; session callbacks hop onto it with post().
class BridgeServer {
 public:
  static constexpr std::size_t kClientQueue = 64;

  /// Binds and listens immediately. Throws BindError.
  BridgeServer(boost::asio::io_context& io, const boost::asio::ip::tcp::endpoint& endpoint)
      : io_(io), acceptor_(io) {
    boost::system::error_code ec;
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(boost::asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(boost::asio::socket_base::max_listen_connections, ec);
    if (ec) throw BindError("cannot listen on " + endpoint.address().to_string() + ":" +
                            std::to_string(endpoint.port()) + ": " + ec.message());
  }

  /// Callbacks to hand to LiveSession; they only post work onto `io`.
  LiveCallbacks callbacks() {
    LiveCallbacks cb;
    cb.on_snapshot = [this](const WireSnapshot& w) {
      boost::asio::post(io_, [this, w] { broadcast(snapshot_message(w)); });
    };
    cb.on_lattice = [this](const LatticeView& v) {
      boost::asio::post(io_, [this, v] { broadcast(cloud_message(v)); });
    };
    cb.on_error = [this](const std::string& m) {
      boost::asio::post(io_, [this, m] { broadcast(error_message(m)); });
    };
    return cb;
  }

  void attach(LiveSession& session) { session_ = &session; }

  void start() { accept(); }

  void stop() {
    boost::system::error_code ignored;
    acceptor_.close(ignored);
    for (const auto& c : clients_) c->close();
    clients_.clear();
  }

  boost::asio::ip::tcp::endpoint local_endpoint() const { return acceptor_.local_endpoint(); }
  std::size_t client_count() const { return clients_.size(); }

 private:
  friend class ClientConnection;

  void accept() {
    acceptor_.async_accept([this](boost::beast::error_code ec, boost::asio::ip::tcp::socket socket) {
                             if (ec) return;  // acceptor closed
                             std::make_shared<ClientConnection>(std::move(socket), *this, kClientQueue)->start();
                             accept();
                           });
  }

  void join(const std::shared_ptr<ClientConnection>& c) {
    clients_.insert(c);
    if (session_) c->send(std::make_shared<const std::string>(hello_message(session_->config(), session_->lattice_view())));
  }

  void leave(const std::shared_ptr<ClientConnection>& c) { clients_.erase(c); }

  void broadcast(std::string text) {
    const auto frame = std::make_shared<const std::string>(std::move(text));
    for (const auto& c : clients_) c->send(frame);
  }

  void handle(std::string_view text, ClientConnection& from) {
    try {
      if (!session_) throw ProtocolError("no session attached");
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SetHipMsg>)
              session_->set_hip(m.position);
            else if constexpr (std::is_same_v<T, SetTransformMsg>)
              session_->set_transform(m.ops);
            else if constexpr (std::is_same_v<T, SetFrictionMsg>)
              session_->set_friction(m.params);
            else
              session_->reset();
          },
          parse_client_message(text));
    } catch (const Error& e) {
      from.send(std::make_shared<const std::string>(error_message(e.what())));
    }
  }

  boost::asio::io_context& io_;
  boost::asio::ip::tcp::acceptor acceptor_;
  LiveSession* session_ = nullptr;
  std::set<std::shared_ptr<ClientConnection>> clients_;
};

inline void ClientConnection::start() {
  ws_.set_option(boost::beast::websocket::stream_base::timeout::suggested(boost::beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](boost::beast::error_code ec) { self->on_accept(ec); });
}

inline void ClientConnection::on_accept(boost::beast::error_code ec) {
  if (ec) return;
  ws_.text(true);
  server_.join(shared_from_this());
  read();
}

inline void ClientConnection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](boost::beast::error_code ec, std::size_t n) {
    self->on_read(ec, n);
  });
}

inline void ClientConnection::on_read(boost::beast::error_code ec, std::size_t) {
  if (ec) return fail();
  const std::string text = boost::beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  if (!ws_.got_text())
    send(std::make_shared<const std::string>(error_message("binary frames are not supported")));
  else
    server_.handle(text, *this);
  read();
}

inline void ClientConnection::write_next() {
  if (outbox_.empty() || closed_) return;
  writing_ = true;
  ws_.async_write(boost::asio::buffer(*outbox_.front()),
                  [self = shared_from_this()](boost::beast::error_code ec, std::size_t n) { self->on_write(ec, n); });
}

inline void ClientConnection::on_write(boost::beast::error_code ec, std::size_t) {
  writing_ = false;
  if (!outbox_.empty()) outbox_.pop_front();
  if (ec) return fail();
  write_next();
}

inline void ClientConnection::fail() {
  closed_ = true;
  outbox_.clear();
  server_.leave(shared_from_this());
}

}  // namespace haptic
