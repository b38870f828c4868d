#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fricsym {

struct MetricsRow {
    std::string method;
    std::string split; // train | test | all
    std::size_t samples = 0;
    double mae = 0.0;
    double mse = 0.0;
    std::size_t complexity = 0;
    std::string formula;
};

struct MetricsReport {
    std::string dataset;
    std::string split;
    std::vector<MetricsRow> rows;
    nlohmann::json extra = nlohmann::json::object(); // command-specific summary fields
};

MetricsRow make_row(std::string method, std::string split, std::span<const double> prediction,
                    std::span<const double> target, std::size_t complexity, std::string formula);

double mean_absolute_error(std::span<const double> a, std::span<const double> b);
double mean_squared_error(std::span<const double> a, std::span<const double> b);

/// Aligned table: Method, Split, N, MAE [Nm], MSE, Complexity, Formula.
std::string render_text(const MetricsReport& r);

void to_json(nlohmann::json& j, const MetricsRow& r);
void to_json(nlohmann::json& j, const MetricsReport& r);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace fricsym
