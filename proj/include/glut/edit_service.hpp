#pragma once

#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "glut/cglut.hpp"
#include "glut/cube_lut.hpp"
#include "glut/editing.hpp"
#include "glut/image.hpp"
#include "glut/model_io.hpp"
#include "glut/pipeline.hpp"

namespace glut {

struct ServiceOptions {
    std::string cors_origin = "http://localhost:5173";
    std::size_t max_upload_bytes = 64u << 20;
    int preview_max_edge = 1024;
    int threads = 0;
    std::string journal_dir;  // when set, each session's journal is mirrored to <dir>/<id>.jsonl
};

/// One editing session. Mutations (edit, undo, blend) hold `write_mu` for their whole duration;
/// the published state (model snapshot + revision) is swapped under `state_mu`, so readers always
/// observe one complete revision.
class Session {
public:
    struct Snapshot {
        std::shared_ptr<const GlutModel> model;
        std::uint64_t revision = 0;
    };

    Session(std::string id, Image source, GlutModel model, std::optional<CglutModel> cglut, int preview_max_edge)
        : id_(std::move(id)),
          source_(std::move(source)),
          preview_source_(downscale_area(source_, preview_max_edge)),
          cglut_(std::move(cglut)),
          journal_(model) {
        publish();
    }

    const std::string& id() const { return id_; }
    const Image& source() const { return source_; }
    const Image& preview_source() const { return preview_source_; }
    const std::optional<CglutModel>& cglut() const { return cglut_; }

    Snapshot snapshot() const {
        std::lock_guard lock(state_mu_);
        return state_;
    }

    std::mutex& write_mutex() { return write_mu_; }
    EditJournal& journal() { return journal_; }

    /// Publishes the journal's current model as the next revision (caller holds write_mutex).
    void bump() {
        std::lock_guard lock(state_mu_);
        state_.model = std::make_shared<const GlutModel>(journal_.current());
        ++state_.revision;
    }

    /// Rendered preview for a snapshot, cached per revision.
    std::shared_ptr<const std::vector<unsigned char>> preview_png(const Snapshot& snap, int threads) {
        {
            std::lock_guard lock(cache_mu_);
            if (cache_ && cache_rev_ == snap.revision) return cache_;
        }
        const Image img = apply_to_image(*snap.model, preview_source_, threads);
        auto png = std::make_shared<const std::vector<unsigned char>>(encode_png(img, 8));
        std::lock_guard lock(cache_mu_);
        if (!cache_ || snap.revision >= cache_rev_) {
            cache_ = png;
            cache_rev_ = snap.revision;
        }
        return png;
    }

private:
    void publish() {
        std::lock_guard lock(state_mu_);
        state_.model = std::make_shared<const GlutModel>(journal_.current());
    }

    std::string id_;
    Image source_;
    Image preview_source_;
    std::optional<CglutModel> cglut_;
    EditJournal journal_;
    std::mutex write_mu_;
    mutable std::mutex state_mu_;
    Snapshot state_;
    std::mutex cache_mu_;
    std::shared_ptr<const std::vector<unsigned char>> cache_;
    std::uint64_t cache_rev_ = 0;
};

/// HTTP/JSON front end for interactive edits. Colors in requests and responses are [r,g,b]
/// floats in [0,1].
class EditService {
public:
    explicit EditService(ServiceOptions opt = {}) : opt_(std::move(opt)) { install_routes(); }

    httplib::Server& server() { return server_; }

    /// Binds to an OS-chosen port on host and returns it (or -1).
    int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
    bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::shared_lock lock(sessions_mu_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

private:
    using json = nlohmann::json;

    static json color_json(const Vec3& c) { return json::array({c[0], c[1], c[2]}); }

    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }
    static void send_error(httplib::Response& res, int status, const std::string& msg) { send_json(res, status, {{"error", msg}}); }

    static std::string preview_url(const Session& s, std::uint64_t rev) {
        return "/sessions/" + s.id() + "/preview.png?rev=" + std::to_string(rev);
    }

    std::string new_id() {
        std::lock_guard lock(id_mu_);
        char buf[40];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
        return buf;
    }

    void persist(Session& s) {
        if (opt_.journal_dir.empty()) return;
        std::ofstream out(opt_.journal_dir + "/" + s.id() + ".jsonl", std::ios::trunc);
        out << s.journal().to_json_lines();
    }

    /// Resolves the session or answers 404.
    std::shared_ptr<Session> session_or_404(const httplib::Request& req, httplib::Response& res) const {
        auto s = find(req.path_params.at("id"));
        if (!s) send_error(res, 404, "unknown session");
        return s;
    }

    static json parse_body(const httplib::Request& req) {
        try {
            return json::parse(req.body);
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("malformed JSON body: ") + e.what());
        }
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data()) return send_error(res, 400, "expected multipart/form-data with 'image' and 'model' parts");
        if (!req.has_file("image")) return send_error(res, 400, "missing 'image' part");
        if (!req.has_file("model")) return send_error(res, 400, "missing 'model' part");
        const std::string img_bytes = req.get_file_value("image").content;
        const auto* img_data = reinterpret_cast<const unsigned char*>(img_bytes.data());
        if (!is_png(img_data, img_bytes.size())) return send_error(res, 415, "image must be a PNG file");
        Image img;
        try {
            img = decode_png(img_data, img_bytes.size());
        } catch (const std::exception& e) {
            return send_error(res, 400, e.what());
        }
        const std::string mb = req.get_file_value("model").content;
        const std::span<const std::uint8_t> model_bytes(reinterpret_cast<const std::uint8_t*>(mb.data()), mb.size());
        std::optional<CglutModel> cglut;
        GlutModel model;
        std::size_t style = 0;
        try {
            const ModelKind kind = peek_model_kind(model_bytes);
            if (kind == ModelKind::Glut) {
                model = deserialize_glut(model_bytes);
            } else {
                cglut = deserialize_cglut(model_bytes);
                if (req.has_file("style")) {
                    const std::string v = req.get_file_value("style").content;
                    std::size_t used = 0;
                    long long parsed = -1;
                    try {
                        parsed = std::stoll(v, &used);
                    } catch (const std::exception&) {
                    }
                    if (used != v.size() || parsed < 0) return send_error(res, 422, "style must be a non-negative integer");
                    style = static_cast<std::size_t>(parsed);
                }
                if (style >= cglut->styles()) return send_error(res, 422, "style index out of range");
                model = cglut->materialize(style);
            }
        } catch (const std::exception& e) {
            return send_error(res, 400, std::string("invalid model file: ") + e.what());
        }
        auto s = std::make_shared<Session>(new_id(), std::move(img), std::move(model), std::move(cglut), opt_.preview_max_edge);
        {
            std::unique_lock lock(sessions_mu_);
            sessions_[s->id()] = s;
        }
        const auto snap = s->snapshot();
        json body = info_json(*s, snap);
        body["session_id"] = s->id();
        send_json(res, 201, body);
    }

    json info_json(Session& s, const Session::Snapshot& snap) {
        json journal = json::array();
        {
            std::lock_guard lock(s.write_mutex());
            for (const auto& r : s.journal().records()) journal.push_back(r.to_json());
        }
        return {{"session_id", s.id()},
                {"revision", snap.revision},
                {"preview_url", preview_url(s, snap.revision)},
                {"kind", s.cglut() ? "cglut" : "glut"},
                {"styles", s.cglut() ? s.cglut()->styles() : 0},
                {"primitives", snap.model->size()},
                {"width", s.source().width},
                {"height", s.source().height},
                {"preview_width", s.preview_source().width},
                {"preview_height", s.preview_source().height},
                {"journal", journal}};
    }

    void edit(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        EditConstraint c;
        try {
            c = constraint_from_json(parse_body(req));
        } catch (const InvalidEdit& e) {
            return send_error(res, 422, e.what());
        } catch (const std::exception& e) {
            return send_error(res, 400, e.what());
        }
        std::lock_guard lock(s->write_mutex());
        EditRecord rec;
        try {
            if (c.strength == 0.0) {
                GlutModel scratch = s->journal().current();
                rec = apply_edit(scratch, c);  // diagnostics only; nothing changes
            } else {
                rec = s->journal().apply(c);
                s->bump();
                persist(*s);
            }
        } catch (const InvalidEdit& e) {
            return send_error(res, 422, e.what());
        } catch (const DegenerateEdit& e) {
            return send_error(res, 409, e.what());
        }
        const auto snap = s->snapshot();
        json body = rec.to_json();
        body["revision"] = snap.revision;
        body["preview_url"] = preview_url(*s, snap.revision);
        send_json(res, 200, body);
    }

    void undo_edit(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        std::lock_guard lock(s->write_mutex());
        if (s->journal().empty()) return send_error(res, 409, "nothing to undo");
        EditRecord rec;
        try {
            rec = s->journal().undo_last();
        } catch (const LineageError& e) {
            return send_error(res, 409, e.what());
        }
        s->bump();
        persist(*s);
        const auto snap = s->snapshot();
        json body = {{"undone", rec.to_json()}, {"revision", snap.revision}, {"preview_url", preview_url(*s, snap.revision)},
                     {"journal_length", s->journal().records().size()}};
        send_json(res, 200, body);
    }

    void blend_styles(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        if (!s->cglut()) return send_error(res, 422, "blending requires a conditional (multi-style) model");
        std::size_t l1 = 0, l2 = 0;
        double alpha = 0.0;
        try {
            const json j = parse_body(req);
            const auto& a = j.at("l1");
            const auto& b = j.at("l2");
            if (!a.is_number_integer() || !b.is_number_integer() || a.get<long long>() < 0 || b.get<long long>() < 0)
                return send_error(res, 422, "l1 and l2 must be non-negative integers");
            l1 = a.get<std::size_t>();
            l2 = b.get<std::size_t>();
            alpha = j.at("alpha").get<double>();
        } catch (const std::exception& e) {
            return send_error(res, 400, e.what());
        }
        if (l1 >= s->cglut()->styles() || l2 >= s->cglut()->styles()) return send_error(res, 422, "style index out of range");
        if (!(alpha >= 0.0 && alpha <= 1.0)) return send_error(res, 422, "alpha must lie in [0,1]");
        std::lock_guard lock(s->write_mutex());
        s->journal().reset(s->cglut()->blend(l1, l2, alpha));
        s->bump();
        persist(*s);
        const auto snap = s->snapshot();
        send_json(res, 200, {{"revision", snap.revision}, {"preview_url", preview_url(*s, snap.revision)}, {"l1", l1}, {"l2", l2}, {"alpha", alpha}});
    }

    void pixel(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        long long x = -1, y = -1;
        try {
            x = std::stoll(req.get_param_value("x"));
            y = std::stoll(req.get_param_value("y"));
        } catch (const std::exception&) {
            return send_error(res, 422, "x and y query parameters must be integers");
        }
        const Image& src = s->source();
        if (x < 0 || y < 0 || x >= src.width || y >= src.height) return send_error(res, 422, "pixel outside the image");
        const auto snap = s->snapshot();
        const Rgb in = src.at(static_cast<int>(x), static_cast<int>(y));
        send_json(res, 200, {{"x", x}, {"y", y}, {"source", color_json(in)}, {"current", color_json(evaluate(*snap.model, in))},
                             {"revision", snap.revision}});
    }

    void preview(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        const auto snap = s->snapshot();
        const auto png = s->preview_png(snap, opt_.threads);
        res.status = 200;
        res.set_header("X-Revision", std::to_string(snap.revision));
        res.set_header("Cache-Control", "no-store");
        res.set_content(reinterpret_cast<const char*>(png->data()), png->size(), "image/png");
    }

    void export_cube(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        int size = 33;
        if (req.has_param("size")) {
            try {
                size = std::stoi(req.get_param_value("size"));
            } catch (const std::exception&) {
                return send_error(res, 422, "size must be an integer");
            }
        }
        if (size < 2 || size > 256) return send_error(res, 422, "size must lie in [2, 256]");
        const auto snap = s->snapshot();
        CubeLut lut = bake_to_cube(*snap.model, size, opt_.threads);
        res.status = 200;
        res.set_header("X-Revision", std::to_string(snap.revision));
        res.set_content(write_cube(lut), "text/plain");
    }

    void export_model(const httplib::Request& req, httplib::Response& res) {
        auto s = session_or_404(req, res);
        if (!s) return;
        const auto snap = s->snapshot();
        const auto bytes = serialize(*snap.model);
        res.status = 200;
        res.set_header("X-Revision", std::to_string(snap.revision));
        res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/octet-stream");
    }

    void install_routes() {
        server_.set_payload_max_length(opt_.max_upload_bytes);
        server_.set_default_headers({{"Access-Control-Allow-Origin", opt_.cors_origin},
                                     {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Expose-Headers", "X-Revision"}});
        server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            } catch (...) {
                send_error(res, 500, "internal error");
            }
        });
        server_.Post("/sessions", [this](const auto& req, auto& res) { create_session(req, res); });
        server_.Get("/sessions/:id", [this](const auto& req, auto& res) {
            auto s = session_or_404(req, res);
            if (s) send_json(res, 200, info_json(*s, s->snapshot()));
        });
        server_.Delete("/sessions/:id", [this](const auto& req, auto& res) {
            std::unique_lock lock(sessions_mu_);
            if (sessions_.erase(req.path_params.at("id")) == 0) return send_error(res, 404, "unknown session");
            res.status = 204;
        });
        server_.Post("/sessions/:id/edit", [this](const auto& req, auto& res) { edit(req, res); });
        server_.Post("/sessions/:id/undo", [this](const auto& req, auto& res) { undo_edit(req, res); });
        server_.Post("/sessions/:id/blend", [this](const auto& req, auto& res) { blend_styles(req, res); });
        server_.Get("/sessions/:id/pixel", [this](const auto& req, auto& res) { pixel(req, res); });
        server_.Get("/sessions/:id/preview.png", [this](const auto& req, auto& res) { preview(req, res); });
        server_.Get("/sessions/:id/export.cube", [this](const auto& req, auto& res) { export_cube(req, res); });
        server_.Get("/sessions/:id/export.model", [this](const auto& req, auto& res) { export_model(req, res); });
    }

    ServiceOptions opt_;
    httplib::Server server_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mutex id_mu_;
    std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace glut
