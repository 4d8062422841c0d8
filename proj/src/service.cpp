#include "hydrocal/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>

#include "hydrocal/errors.hpp"
#include "hydrocal/synth.hpp"

namespace hydrocal {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct RequestError {
  const char* code;
  std::string message;
};

ordered_json error_response(const ordered_json& id, const char* code, const std::string& message) {
  ordered_json r;
  r["id"] = id;
  r["ok"] = false;
  r["error"] = {{"code", code}, {"message", message}};
  return r;
}

ordered_json ok_response(const ordered_json& id, ordered_json result) {
  ordered_json r;
  r["id"] = id;
  r["ok"] = true;
  r["result"] = std::move(result);
  return r;
}

const json& field(const json& params, const char* key, json::value_t type, const char* type_name) {
  const auto it = params.find(key);
  if (it == params.end()) throw RequestError{error_code::malformed_request, std::string("missing params.") + key};
  const bool matches = type == json::value_t::number_float ? it->is_number() : it->type() == type;
  if (!matches) throw RequestError{error_code::malformed_request, std::string("params.") + key + " must be " + type_name};
  return *it;
}

template <typename T>
std::optional<T> optional_field(const json& params, const char* key) {
  const auto it = params.find(key);
  if (it == params.end() || it->is_null()) return std::nullopt;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw RequestError{error_code::malformed_request, std::string("params.") + key + " must be a boolean"};
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw RequestError{error_code::malformed_request, std::string("params.") + key + " must be an integer"};
  } else {
    if (!it->is_number()) throw RequestError{error_code::malformed_request, std::string("params.") + key + " must be a number"};
  }
  return it->get<T>();
}

ordered_json from_tool(const ordered_json& id, const ToolResult& r) {
  if (r.ok) return ok_response(id, r.result);
  return error_response(id, r.code.c_str(), r.message);
}

}  // namespace

EpisodeService::EpisodeService(ServiceOptions options) : options_(std::move(options)) {}

std::size_t EpisodeService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<EpisodeService::Session> EpisodeService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw RequestError{error_code::unknown_session, "unknown session '" + id + "'"};
  return it->second;
}

ordered_json EpisodeService::create_episode(const json& params) {
  EpisodeConfig cfg;
  cfg.target_nse = optional_field<double>(params, "target_nse");
  if (auto v = optional_field<int>(params, "max_turns")) cfg.max_turns = *v;
  if (auto v = optional_field<int>(params, "no_improve_rounds")) cfg.no_improve_rounds = *v;
  cfg.wall_clock_budget_s = optional_field<double>(params, "wall_clock_budget_s");
  if (auto v = optional_field<double>(params, "improvement_epsilon")) cfg.improvement_epsilon = *v;
  if (auto v = optional_field<bool>(params, "allow_fixed_override")) cfg.allow_fixed_override = *v;

  std::shared_ptr<const CatchmentTask> task;
  try {
    if (params.contains("control")) {
      std::filesystem::path p = field(params, "control", json::value_t::string, "a string").get<std::string>();
      task = load_task(p.is_absolute() ? p : options_.base_dir / p);
    } else if (params.contains("synth")) {
      const json& s = field(params, "synth", json::value_t::object, "an object");
      SynthOptions so;
      if (auto v = optional_field<int>(s, "n")) so.n = *v;
      if (auto v = optional_field<double>(s, "noise_frac")) so.noise_frac = *v;
      if (auto v = optional_field<int>(s, "days")) so.days = *v;
      if (s.contains("scenario")) so.scenario = scenario_from_string(field(s, "scenario", json::value_t::string, "a string").get<std::string>());
      const auto seed = optional_field<std::uint64_t>(s, "seed").value_or(0);
      task = synth_task(synth_basin(seed, so));
    } else {
      throw RequestError{error_code::malformed_request, "create_episode needs params.control or params.synth"};
    }
  } catch (const RequestError&) {
    throw;
  } catch (const std::exception& e) {
    throw RequestError{error_code::malformed_request, e.what()};
  }

  std::unique_ptr<Episode> ep;
  try {
    ep = std::make_unique<Episode>(task, cfg);
  } catch (const ConfigError& e) {
    throw RequestError{error_code::bounds_violation, e.what()};
  }
  auto session = std::make_shared<Session>();
  session->episode = std::move(ep);
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = "s" + std::to_string(next_id_++);
    sessions_[id] = session;
  }
  std::lock_guard lock(session->mu);
  return {{"session", id}, {"status", session->episode->status_json()}};
}

ordered_json EpisodeService::handle(const json& request) {
  ordered_json id = nullptr;
  try {
    if (!request.is_object()) throw RequestError{error_code::malformed_request, "request must be a JSON object"};
    const auto id_it = request.find("id");
    if (id_it == request.end() || !id_it->is_number_integer()) {
      throw RequestError{error_code::malformed_request, "request needs an integer id"};
    }
    id = id_it->get<long long>();
    const auto m_it = request.find("method");
    if (m_it == request.end() || !m_it->is_string()) throw RequestError{error_code::malformed_request, "request needs a method"};
    const std::string method = m_it->get<std::string>();
    json params = json::object();
    if (const auto p_it = request.find("params"); p_it != request.end() && !p_it->is_null()) {
      if (!p_it->is_object()) throw RequestError{error_code::malformed_request, "params must be an object"};
      params = *p_it;
    }

    if (method == "create_episode") return ok_response(id, create_episode(params));

    static const char* const kSessionMethods[] = {"set_parameters", "run_simulation", "evaluate", "parse_failure",
                                                  "status",         "score",          "close"};
    if (std::find(std::begin(kSessionMethods), std::end(kSessionMethods), method) == std::end(kSessionMethods)) {
      throw RequestError{error_code::malformed_request, "unknown method '" + method + "'"};
    }
    const std::string sid = field(params, "session", json::value_t::string, "a string").get<std::string>();
    const auto session = find(sid);
    std::lock_guard lock(session->mu);
    Episode& ep = *session->episode;
    if (method == "set_parameters") {
      const auto it = params.find("values");
      if (it == params.end()) throw RequestError{error_code::malformed_request, "missing params.values"};
      return from_tool(id, ep.set_parameters(*it));
    }
    if (method == "run_simulation") return from_tool(id, ep.run_simulation());
    if (method == "evaluate") return from_tool(id, ep.evaluate());
    if (method == "parse_failure") return from_tool(id, ep.parse_failure());
    if (method == "status") return ok_response(id, ep.status_json());
    if (method == "score") return ok_response(id, ep.score_json());
    return from_tool(id, ep.close());
  } catch (const RequestError& e) {
    return error_response(id, e.code, e.message);
  } catch (const std::exception& e) {
    return error_response(id, error_code::malformed_request, e.what());
  }
}

std::string EpisodeService::handle(const std::string& line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::parse_error& e) {
    return error_response(nullptr, error_code::malformed_request, std::string("invalid JSON: ") + e.what()).dump();
  }
  return handle(request).dump();
}

void serve_stdio(EpisodeService& service, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << service.handle(line) << '\n' << std::flush;
  }
}

// ---------------------------------------------------------------------------

TcpServer::TcpServer(EpisodeService& service, const std::string& host, int port) : service_(service) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::runtime_error("invalid IPv4 host '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() { acceptor_ = std::thread([this] { run(); }); }

void TcpServer::run() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mu_);
    client_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  while (!stopping_) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string reply = service_.handle(line) + "\n";
      std::size_t sent = 0;
      while (sent < reply.size()) {
        const ssize_t w = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (w <= 0) return;
        sent += static_cast<std::size_t>(w);
      }
    }
  }
}

void TcpServer::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connections_);
  }
  for (auto& t : threads) t.join();
  std::lock_guard lock(mu_);
  for (int fd : client_fds_) ::close(fd);
  client_fds_.clear();
}

}  // namespace hydrocal
