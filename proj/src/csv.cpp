#include "bmsim/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace bmsim {

std::string csv_format(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

Real csv_roundtrip(Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::strtod(buf, nullptr);
}

namespace {

std::vector<std::string> expected_header(Eigen::Index sigma, Eigen::Index rho,
                                         Eigen::Index nu) {
    std::vector<std::string> h{"t"};
    for (Eigen::Index j = 1; j <= sigma; ++j) h.push_back("I_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= rho; ++j) h.push_back("V_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= nu; ++j) h.push_back("u_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= sigma; ++j) h.push_back("dI_" + std::to_string(j));
    for (Eigen::Index j = 1; j <= rho; ++j) h.push_back("dV_" + std::to_string(j));
    h.push_back("S");
    h.push_back("S_d");
    h.push_back("supply");
    return h;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw Error("cannot open " + path + " for writing");
    const auto header = expected_header(traj.sigma, traj.rho, traj.nu);
    std::string line;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) line += ',';
        line += header[i];
    }
    line += '\n';
    std::fwrite(line.data(), 1, line.size(), f);

    char buf[40];
    auto put = [&](Real v, char sep) {
        const int n = std::snprintf(buf, sizeof(buf), "%.12g", v);
        std::fwrite(buf, 1, static_cast<std::size_t>(n), f);
        std::fputc(sep, f);
    };
    const auto sigma = static_cast<std::size_t>(traj.sigma);
    const auto rho = static_cast<std::size_t>(traj.rho);
    const auto nu = static_cast<std::size_t>(traj.nu);
    for (std::size_t k = 0; k < traj.rows(); ++k) {
        put(traj.t[k], ',');
        for (std::size_t j = 0; j < sigma; ++j) put(traj.I[k * sigma + j], ',');
        for (std::size_t j = 0; j < rho; ++j) put(traj.V[k * rho + j], ',');
        for (std::size_t j = 0; j < nu; ++j) put(traj.u[k * nu + j], ',');
        for (std::size_t j = 0; j < sigma; ++j) put(traj.dI[k * sigma + j], ',');
        for (std::size_t j = 0; j < rho; ++j) put(traj.dV[k * rho + j], ',');
        put(traj.S[k], ',');
        put(traj.Sd[k], ',');
        put(traj.supply[k], '\n');
    }
    std::fclose(f);
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header)) throw SchemaMismatch("empty trajectory file");
    if (!header.empty() && header.back() == '\r') header.pop_back();

    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string tok;
        while (std::getline(ss, tok, ',')) names.push_back(tok);
    }
    // Recover dimensions by counting the column groups.
    Eigen::Index sigma = 0, rho = 0, nu = 0;
    for (const auto& n : names) {
        if (n.rfind("I_", 0) == 0) ++sigma;
        else if (n.rfind("V_", 0) == 0) ++rho;
        else if (n.rfind("u_", 0) == 0) ++nu;
    }
    const auto expect = expected_header(sigma, rho, nu);
    if (names != expect) throw SchemaMismatch("unexpected trajectory header: " + header);

    Trajectory tr;
    tr.sigma = sigma;
    tr.rho = rho;
    tr.nu = nu;
    const std::size_t ncols = expect.size();
    std::string line;
    std::vector<Real> row(ncols);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.c_str();
        for (std::size_t c = 0; c < ncols; ++c) {
            char* end = nullptr;
            row[c] = std::strtod(p, &end);
            if (end == p) throw SchemaMismatch("bad numeric field in row");
            p = end;
            if (c + 1 < ncols) {
                if (*p != ',') throw SchemaMismatch("wrong column count in row");
                ++p;
            }
        }
        std::size_t c = 0;
        tr.t.push_back(row[c++]);
        for (Eigen::Index j = 0; j < sigma; ++j) tr.I.push_back(row[c++]);
        for (Eigen::Index j = 0; j < rho; ++j) tr.V.push_back(row[c++]);
        for (Eigen::Index j = 0; j < nu; ++j) tr.u.push_back(row[c++]);
        for (Eigen::Index j = 0; j < sigma; ++j) tr.dI.push_back(row[c++]);
        for (Eigen::Index j = 0; j < rho; ++j) tr.dV.push_back(row[c++]);
        tr.S.push_back(row[c++]);
        tr.Sd.push_back(row[c++]);
        tr.supply.push_back(row[c++]);
    }
    if (tr.rows() < 2) throw SchemaMismatch("trajectory has fewer than two rows");
    tr.dt = tr.t[1] - tr.t[0];
    return tr;
}

}  // namespace bmsim
