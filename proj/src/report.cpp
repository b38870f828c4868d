#include "fricsym/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "fricsym/error.hpp"

namespace fricsym {

double mean_absolute_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("length mismatch in error metric");
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

double mean_squared_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("length mismatch in error metric");
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

MetricsRow make_row(std::string method, std::string split, std::span<const double> prediction,
                    std::span<const double> target, std::size_t complexity, std::string formula) {
    MetricsRow r;
    r.method = std::move(method);
    r.split = std::move(split);
    r.samples = target.size();
    r.mae = mean_absolute_error(prediction, target);
    r.mse = mean_squared_error(prediction, target);
    r.complexity = complexity;
    r.formula = std::move(formula);
    return r;
}

std::string render_text(const MetricsReport& r) {
    std::vector<std::vector<std::string>> cells{{"Method", "Split", "N", "MAE [Nm]", "MSE", "Complexity", "Formula"}};
    for (const auto& row : r.rows)
        cells.push_back({row.method, row.split, fmt::format("{}", row.samples), fmt::format("{:.6g}", row.mae),
                         fmt::format("{:.6g}", row.mse), fmt::format("{}", row.complexity), row.formula});
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& line : cells)
        for (std::size_t c = 0; c + 1 < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

    std::string out = fmt::format("dataset: {}\nsplit: {}\n\n", r.dataset, r.split);
    for (std::size_t l = 0; l < cells.size(); ++l) {
        std::string line;
        for (std::size_t c = 0; c < cells[l].size(); ++c) {
            if (c + 1 < cells[l].size())
                line += fmt::format("{:<{}}  ", cells[l][c], width[c]);
            else
                line += cells[l][c];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + '\n';
        if (l == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c + 1 < width.size(); ++c) total += width[c] + 2;
            out += std::string(total + 7, '-') + '\n';
        }
    }
    for (const auto& [key, value] : r.extra.items()) out += fmt::format("{}: {}\n", key, value.dump());
    return out;
}

void to_json(nlohmann::json& j, const MetricsRow& r) {
    j = {{"method", r.method},   {"split", r.split},           {"samples", r.samples}, {"mae", r.mae},
         {"mse", r.mse},         {"complexity", r.complexity}, {"formula", r.formula}};
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = {{"dataset", r.dataset}, {"split", r.split}, {"rows", r.rows}};
    if (!r.extra.empty()) j["summary"] = r.extra;
}

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 unavailable");
    }
    void update(const char* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("sha256 update failed");
    }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("sha256 final failed");
        std::string out;
        for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

} // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

} // namespace fricsym
