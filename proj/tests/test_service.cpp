#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "glut/edit_service.hpp"
#include "test_support.hpp"

using namespace glut;
using json = nlohmann::json;

namespace {

/// f(x) = x exactly: zero local maps, identity global map.
GlutModel identity_model() {
    GlutModel m(1);
    GaussianPrimitive p = m.primitive(0);
    p.mean = {0.5, 0.5, 0.5};
    p.local_matrix = Mat3{};
    m.set_primitive(0, p);
    m.set_global_matrix(Mat3::identity());
    return m;
}

GlutModel fitted_like_model() {
    std::mt19937_64 rng(42);
    GlutModel m = glut::testing::random_model(12, rng);
    snap_to_storage_precision(m);
    return m;
}

std::string to_string(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }

std::string gradient_png(int w, int h) {
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = {x / double(std::max(1, w - 1)), y / double(std::max(1, h - 1)), 0.4};
    const auto png = encode_png(img, 8);
    return {png.begin(), png.end()};
}

class ServiceTest : public ::testing::Test {
protected:
    void start(ServiceOptions opt = {}) {
        svc_ = std::make_unique<EditService>(opt);
        port_ = svc_->bind_any();
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { svc_->listen_after_bind(); });
        svc_->wait_until_ready();
        cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        cli_->set_read_timeout(60, 0);
    }
    void SetUp() override { start(); }
    void TearDown() override {
        svc_->stop();
        if (thread_.joinable()) thread_.join();
    }

    httplib::Result create(const std::string& png, const std::string& model, const std::string& style = "") {
        httplib::MultipartFormDataItems items{{"image", png, "in.png", "image/png"}, {"model", model, "m.glut", "application/octet-stream"}};
        if (!style.empty()) items.push_back({"style", style, "", ""});
        return cli_->Post("/sessions", items);
    }

    std::string create_ok(const std::string& png, const GlutModel& m) {
        auto r = create(png, to_string(serialize(m)));
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, 201) << r->body;
        return json::parse(r->body).at("session_id").get<std::string>();
    }

    httplib::Result post_json(const std::string& path, const json& body) { return cli_->Post(path, body.dump(), "application/json"); }

    std::unique_ptr<EditService> svc_;
    std::unique_ptr<httplib::Client> cli_;
    std::thread thread_;
    int port_ = 0;
};

json edit_body(Rgb in, Rgb out, int k, double s) {
    return {{"c_in", {in[0], in[1], in[2]}}, {"c_out", {out[0], out[1], out[2]}}, {"K", k}, {"s", s}};
}

}  // namespace

TEST_F(ServiceTest, CreateSessionAndPreview) {
    auto r = create(gradient_png(1500, 30), to_string(serialize(fitted_like_model())));
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 201) << r->body;
    const auto j = json::parse(r->body);
    EXPECT_FALSE(j.at("session_id").get<std::string>().empty());
    EXPECT_EQ(j.at("revision"), 0);
    EXPECT_EQ(j.at("kind"), "glut");
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), ServiceOptions{}.cors_origin);
    auto p = cli_->Get(j.at("preview_url").get<std::string>());
    ASSERT_TRUE(p);
    ASSERT_EQ(p->status, 200);
    EXPECT_EQ(p->get_header_value("Content-Type"), "image/png");
    const Image img = decode_png(reinterpret_cast<const unsigned char*>(p->body.data()), p->body.size());
    EXPECT_EQ(img.width, 1024);
    EXPECT_LE(img.height, 1024);
}

TEST_F(ServiceTest, UploadErrors) {
    const std::string png = gradient_png(8, 8);
    auto model = to_string(serialize(fitted_like_model()));
    auto truncated = create(png, model.substr(0, model.size() - 5));
    ASSERT_TRUE(truncated);
    EXPECT_EQ(truncated->status, 400);
    EXPECT_NE(truncated->body.find("model"), std::string::npos);
    auto not_png = create("GIF89a not an image", model);
    ASSERT_TRUE(not_png);
    EXPECT_EQ(not_png->status, 415);
    httplib::MultipartFormDataItems only_image{{"image", png, "in.png", "image/png"}};
    auto missing = cli_->Post("/sessions", only_image);
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 400);
}

TEST_F(ServiceTest, UploadSizeCap) {
    TearDown();
    ServiceOptions opt;
    opt.max_upload_bytes = 4096;
    start(opt);
    auto r = create(gradient_png(200, 200) + std::string(8192, 'x'), to_string(serialize(fitted_like_model())));
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 413);
}

TEST_F(ServiceTest, ConditionalStyleSelection) {
    auto cm = CglutModel::initialized(7, 8, 16, 4, CglutMode::FullGeneration, 3);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0, 0.2);
    for (double& w : cm.weights()) w += nd(rng);
    snap_to_storage_precision(cm);
    const std::string bytes = to_string(serialize(cm));
    auto ok = create(gradient_png(16, 16), bytes, "3");
    ASSERT_TRUE(ok);
    ASSERT_EQ(ok->status, 201) << ok->body;
    const auto j = json::parse(ok->body);
    EXPECT_EQ(j.at("kind"), "cglut");
    EXPECT_EQ(j.at("styles"), 7);
    auto m = cli_->Get("/sessions/" + j.at("session_id").get<std::string>() + "/export.model");
    EXPECT_EQ(m->body, to_string(serialize(cm.materialize(3))));
    auto bad = create(gradient_png(16, 16), bytes, "9");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 422);
}

TEST_F(ServiceTest, EditUndoAndContraction) {
    const GlutModel base = fitted_like_model();
    const std::string id = create_ok(gradient_png(64, 48), base);
    const std::string root = "/sessions/" + id;
    const auto before_preview = cli_->Get(root + "/preview.png")->body;

    auto r = post_json(root + "/edit", edit_body({0.4, 0.5, 0.6}, {0.7, 0.2, 0.3}, 3, 0.6));
    ASSERT_EQ(r->status, 200) << r->body;
    auto j = json::parse(r->body);
    EXPECT_EQ(j.at("revision"), 1);
    const double m = j.at("m");
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(j["residual_after"][k].get<double>(), (1 - 0.6 * m) * j["residual_before"][k].get<double>(), 1e-6);
    EXPECT_NE(cli_->Get(root + "/preview.png")->body, before_preview);

    auto zero = post_json(root + "/edit", edit_body({0.4, 0.5, 0.6}, {0.1, 0.1, 0.1}, 2, 0.0));
    ASSERT_EQ(zero->status, 200);
    j = json::parse(zero->body);
    EXPECT_EQ(j.at("revision"), 1);
    EXPECT_EQ(j.at("residual_after"), j.at("residual_before"));

    auto u = cli_->Post(root + "/undo", "", "application/json");
    ASSERT_EQ(u->status, 200) << u->body;
    EXPECT_EQ(json::parse(u->body).at("revision"), 2);
    EXPECT_EQ(cli_->Get(root + "/export.model")->body, to_string(serialize(base)));
    EXPECT_EQ(cli_->Get(root + "/preview.png")->body, before_preview);
    EXPECT_EQ(cli_->Post(root + "/undo", "", "application/json")->status, 409);
}

TEST_F(ServiceTest, EditErrors) {
    const std::string id = create_ok(gradient_png(8, 8), fitted_like_model());
    const std::string root = "/sessions/" + id;
    EXPECT_EQ(post_json(root + "/edit", edit_body({1.5, 0, 0}, {0, 0, 0}, 1, 1))->status, 422);
    EXPECT_EQ(post_json(root + "/edit", edit_body({0.5, 0.5, 0.5}, {0, 0, 0}, 99, 1))->status, 422);
    EXPECT_EQ(cli_->Post(root + "/edit", "{not json", "application/json")->status, 400);
    EXPECT_EQ(post_json("/sessions/nope/edit", edit_body({0.5, 0.5, 0.5}, {0, 0, 0}, 1, 1))->status, 404);

    GlutModel tiny(1);
    GaussianPrimitive p;
    for (int k = 0; k < 3; ++k) p.chol_raw[static_cast<std::size_t>(k)] = softplus_inverse(0.01);
    tiny.set_primitive(0, p);
    const std::string far = create_ok(gradient_png(8, 8), tiny);
    EXPECT_EQ(post_json("/sessions/" + far + "/edit", edit_body({1, 1, 1}, {0, 0, 0}, 1, 1))->status, 409);
}

TEST_F(ServiceTest, BlendEndpointsMatchStylePreviews) {
    auto cm = CglutModel::initialized(2, 8, 16, 4, CglutMode::FullGeneration, 5);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0, 0.2);
    for (double& w : cm.weights()) w += nd(rng);
    snap_to_storage_precision(cm);
    const std::string bytes = to_string(serialize(cm));
    const std::string png = gradient_png(40, 30);
    auto s0 = json::parse(create(png, bytes, "0")->body).at("session_id").get<std::string>();
    auto s1 = json::parse(create(png, bytes, "1")->body).at("session_id").get<std::string>();
    const auto p0 = cli_->Get("/sessions/" + s0 + "/preview.png")->body;
    const auto p1 = cli_->Get("/sessions/" + s1 + "/preview.png")->body;
    ASSERT_NE(p0, p1);
    // Edit first: blending replaces the base and clears the journal.
    ASSERT_EQ(post_json("/sessions/" + s1 + "/edit", edit_body({0.5, 0.5, 0.5}, {0.9, 0.1, 0.1}, 2, 1))->status, 200);
    auto b = post_json("/sessions/" + s1 + "/blend", {{"l1", 0}, {"l2", 1}, {"alpha", 0.0}});
    ASSERT_EQ(b->status, 200) << b->body;
    EXPECT_EQ(json::parse(b->body).at("revision"), 2);
    EXPECT_EQ(cli_->Get("/sessions/" + s1 + "/preview.png")->body, p0);
    ASSERT_EQ(post_json("/sessions/" + s1 + "/blend", {{"l1", 0}, {"l2", 1}, {"alpha", 1.0}})->status, 200);
    EXPECT_EQ(cli_->Get("/sessions/" + s1 + "/preview.png")->body, p1);
    EXPECT_TRUE(json::parse(cli_->Get("/sessions/" + s1)->body).at("journal").empty());
    EXPECT_EQ(post_json("/sessions/" + s1 + "/blend", {{"l1", 0}, {"l2", 5}, {"alpha", 0.5}})->status, 422);
    EXPECT_EQ(post_json("/sessions/" + s1 + "/blend", {{"l1", 0}, {"l2", 1}, {"alpha", 2.0}})->status, 422);
    const std::string plain = create_ok(png, fitted_like_model());
    EXPECT_EQ(post_json("/sessions/" + plain + "/blend", {{"l1", 0}, {"l2", 1}, {"alpha", 0.5}})->status, 422);
}

TEST_F(ServiceTest, ExportsAndPixel) {
    const std::string id = create_ok(gradient_png(5, 4), identity_model());
    const std::string root = "/sessions/" + id;
    auto cube = cli_->Get(root + "/export.cube?size=2");
    ASSERT_EQ(cube->status, 200);
    EXPECT_EQ(cube->body, write_cube(CubeLut::identity(2)));
    EXPECT_EQ(cli_->Get(root + "/export.cube?size=1")->status, 422);
    const auto def = parse_cube(cli_->Get(root + "/export.cube")->body);
    EXPECT_EQ(def.size, 33);
    auto px = cli_->Get(root + "/pixel?x=4&y=3");
    ASSERT_EQ(px->status, 200);
    const auto j = json::parse(px->body);
    EXPECT_EQ(j.at("source"), json::array({1.0, 1.0, 0.4}));
    EXPECT_EQ(j.at("current"), j.at("source"));
    EXPECT_EQ(cli_->Get(root + "/pixel?x=5&y=0")->status, 422);
    EXPECT_EQ(cli_->Get(root + "/pixel?x=a&y=0")->status, 422);
    EXPECT_EQ(cli_->Get("/sessions/nope/pixel?x=0&y=0")->status, 404);
}

TEST_F(ServiceTest, DeleteAndCorsPreflight) {
    const std::string id = create_ok(gradient_png(4, 4), identity_model());
    auto opt = cli_->Options("/sessions/" + id + "/edit");
    ASSERT_TRUE(opt);
    EXPECT_EQ(opt->status, 204);
    EXPECT_NE(opt->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
    EXPECT_EQ(cli_->Delete("/sessions/" + id)->status, 204);
    EXPECT_EQ(cli_->Get("/sessions/" + id)->status, 404);
    EXPECT_EQ(cli_->Delete("/sessions/" + id)->status, 404);
}

TEST_F(ServiceTest, ConcurrentEditsAreSerialized) {
    const GlutModel base = fitted_like_model();
    const std::string id = create_ok(gradient_png(32, 32), base);
    const std::string root = "/sessions/" + id;
    constexpr int kClients = 6, kEach = 5;
    std::vector<std::vector<int>> revs(kClients);
    std::vector<std::thread> workers;
    for (int c = 0; c < kClients; ++c)
        workers.emplace_back([&, c] {
            httplib::Client cl("127.0.0.1", port_);
            std::mt19937_64 rng(static_cast<std::uint64_t>(c));
            for (int i = 0; i < kEach; ++i) {
                const auto body = edit_body(glut::testing::random_color(rng, 0.2, 0.8), glut::testing::random_color(rng), 3, 0.5);
                auto r = cl.Post(root + "/edit", body.dump(), "application/json");
                if (r && r->status == 200) revs[static_cast<std::size_t>(c)].push_back(json::parse(r->body).at("revision").get<int>());
            }
        });
    for (auto& w : workers) w.join();
    std::vector<int> all;
    for (const auto& v : revs) {
        EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
        all.insert(all.end(), v.begin(), v.end());
    }
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), static_cast<std::size_t>(kClients * kEach));
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], static_cast<int>(i + 1));

    // The journal replays onto the base to exactly the exported model.
    const auto info = json::parse(cli_->Get(root)->body);
    std::string lines;
    for (const auto& rec : info.at("journal")) lines += rec.dump() + "\n";
    EXPECT_EQ(to_string(serialize(replay_journal(base, lines))), cli_->Get(root + "/export.model")->body);
}

TEST_F(ServiceTest, JournalPersistence) {
    TearDown();
    const auto dir = std::filesystem::temp_directory_path() / ("glut_journal_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    ServiceOptions opt;
    opt.journal_dir = dir.string();
    start(opt);
    const std::string id = create_ok(gradient_png(8, 8), fitted_like_model());
    for (int i = 0; i < 3; ++i)
        ASSERT_EQ(post_json("/sessions/" + id + "/edit", edit_body({0.5, 0.4, 0.3}, {0.2, 0.3, 0.9}, 2, 0.5))->status, 200);
    ASSERT_EQ(cli_->Post("/sessions/" + id + "/undo", "", "application/json")->status, 200);
    std::ifstream in(dir / (id + ".jsonl"));
    std::string line;
    int count = 0;
    while (std::getline(in, line)) count += !line.empty();
    EXPECT_EQ(count, 2);
    std::filesystem::remove_all(dir);
}
