#include "bmsim/network.hpp"

#include "bmsim/bm_core.hpp"

#include <numeric>

namespace bmsim {

Mat incidence_from_edges(const std::vector<std::pair<int, int>>& edges, int n) {
    require(n >= 1, "need at least one node");
    Mat D = Mat::Zero(n, static_cast<Eigen::Index>(edges.size()));
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto [a, b] = edges[k];
        if (a < 1 || a > n || b < 1 || b > n)
            throw InvalidEdge("edge endpoint out of range");
        if (a == b) throw InvalidEdge("self-loops are not allowed");
        D(a - 1, static_cast<Eigen::Index>(k)) = 1.0;
        D(b - 1, static_cast<Eigen::Index>(k)) = -1.0;
    }
    return D;
}

namespace {

void check_connected(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n <= 1) return;
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (const auto& [a, b] : edges) parent[static_cast<std::size_t>(find(a - 1))] = find(b - 1);
    const int root = find(0);
    for (int i = 1; i < n; ++i)
        if (find(i) != root) throw DisconnectedGraph("network graph is not connected");
}

}  // namespace

AssembledNetwork assemble_dc_network(const DcNetworkSpec& spec) {
    const Eigen::Index na = static_cast<Eigen::Index>(spec.buck_nodes.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(spec.boost_nodes.size());
    const Eigen::Index n = na + nb;
    const Eigen::Index m = static_cast<Eigen::Index>(spec.lines.size());
    require(n >= 1, "network needs at least one converter node");

    auto check_node = [](const NetworkNode& nd) {
        require(nd.L > 0 && nd.C > 0, "node inductance and capacitance must be positive");
        require(nd.G >= 0, "node conductance must be nonnegative");
        require(nd.Vs != 0, "node source voltage must be nonzero");
    };
    for (const auto& nd : spec.buck_nodes) check_node(nd);
    for (const auto& nd : spec.boost_nodes) check_node(nd);
    std::vector<std::pair<int, int>> edges;
    edges.reserve(spec.lines.size());
    for (const auto& l : spec.lines) {
        require(l.R > 0 && l.L > 0, "line R and L must be positive");
        edges.emplace_back(l.from, l.to);
    }

    const Mat D = incidence_from_edges(edges, static_cast<int>(n));
    check_connected(static_cast<int>(n), edges);

    const Eigen::Index sigma = n + m;  // node inductor currents + line currents
    const Eigen::Index rho = n;

    Vec Ldiag(sigma), Cdiag(rho), Rdiag(sigma), Gdiag(rho), Vs(n), Vstar(n);
    Rdiag.setZero();
    for (Eigen::Index i = 0; i < na; ++i) {
        const auto& nd = spec.buck_nodes[static_cast<std::size_t>(i)];
        Ldiag[i] = nd.L;
        Cdiag[i] = nd.C;
        Gdiag[i] = nd.G;
        Vs[i] = nd.Vs;
        Vstar[i] = nd.Vstar;
    }
    for (Eigen::Index j = 0; j < nb; ++j) {
        const auto& nd = spec.boost_nodes[static_cast<std::size_t>(j)];
        Ldiag[na + j] = nd.L;
        Cdiag[na + j] = nd.C;
        Gdiag[na + j] = nd.G;
        Vs[na + j] = nd.Vs;
        Vstar[na + j] = nd.Vstar;
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        Ldiag[n + k] = spec.lines[static_cast<std::size_t>(k)].L;
        Rdiag[n + k] = spec.lines[static_cast<std::size_t>(k)].R;
    }

    // Gamma0: identity on the converter rows, D^T on the line rows.
    Mat Gamma0 = Mat::Zero(sigma, rho);
    Gamma0.topLeftCorner(n, n) = Mat::Identity(n, n);
    Gamma0.bottomRows(m) = D.transpose();

    // Per channel: buck k contributes dB_k = e_k e_k^T (duty gates its source);
    // boost k contributes dGamma_k = -e_k e_k^T (duty opens the V-I coupling).
    std::vector<Mat> dGamma, dB;
    dGamma.reserve(static_cast<std::size_t>(n));
    dB.reserve(static_cast<std::size_t>(n));
    Mat B0 = Mat::Zero(sigma, n);
    B0.block(na, na, nb, nb) = Mat::Identity(nb, nb);
    for (Eigen::Index k = 0; k < n; ++k) {
        Mat dg = Mat::Zero(sigma, rho);
        Mat db = Mat::Zero(sigma, n);
        if (k < na)
            db(k, k) = 1.0;
        else
            dg(k, k) = -1.0;
        dGamma.push_back(std::move(dg));
        dB.push_back(std::move(db));
    }

    AssembledNetwork net{
        SwitchedRlcSystem(Ldiag.asDiagonal(), Cdiag.asDiagonal(), Rdiag.asDiagonal(),
                          Gdiag.asDiagonal(), std::move(Gamma0), std::move(dGamma), std::move(B0),
                          std::move(dB), std::move(Vs)),
        na, nb, m, D, std::move(Vstar)};
    return net;
}

Vec network_output_ydc(const AssembledNetwork& net, const CircuitState& s, const Vec& dI,
                       const Vec& dV) {
    const Eigen::Index na = net.n_alpha, nb = net.n_beta;
    Vec y(na + nb);
    y.head(na) = dI.head(na).cwiseProduct(net.sys.Vs().head(na));
    y.tail(nb) = dI.segment(na, nb).cwiseProduct(s.V.tail(nb)) -
                 dV.tail(nb).cwiseProduct(s.I.segment(na, nb));
    return y;
}

Setpoint network_setpoint(const AssembledNetwork& net) {
    const auto& sys = net.sys;
    const Eigen::Index na = net.n_alpha, nb = net.n_beta;
    const Eigen::Index n = na + nb, m = net.n_lines;
    const Eigen::Index sigma = sys.sigma();
    const Vec& vstar = net.Vstar;

    // Seed with isolated-converter closed forms and zero line currents.
    Vec I = Vec::Zero(sigma), u(n);
    for (Eigen::Index i = 0; i < na; ++i) {
        u[i] = vstar[i] / sys.Vs()[i];
        I[i] = sys.G()(i, i) * vstar[i];
    }
    for (Eigen::Index j = na; j < n; ++j) {
        u[j] = 1.0 - sys.Vs()[j] / vstar[j];
        I[j] = sys.G()(j, j) * vstar[j] * vstar[j] / sys.Vs()[j];
    }

    auto residual = [&](const Vec& Ix, const Vec& ux) -> Vec {
        const Mat gamma = sys.gamma_at(ux);
        Vec r(sigma + n);
        r.head(sigma) = gamma * vstar + sys.R() * Ix - sys.b_at(ux) * sys.Vs();
        r.tail(n) = gamma.transpose() * Ix - sys.G() * vstar;
        return r;
    };

    const Real scale = std::max<Real>(1.0, vstar.cwiseAbs().maxCoeff());
    for (int it = 0; it < 50; ++it) {
        const Vec r = residual(I, u);
        if (r.cwiseAbs().maxCoeff() <= 1e-10 * scale) break;
        Mat J = Mat::Zero(sigma + n, sigma + n);
        J.topLeftCorner(sigma, sigma) = sys.R();
        J.bottomLeftCorner(n, sigma) = sys.gamma_at(u).transpose();
        for (Eigen::Index k = 0; k < n; ++k) {
            J.block(0, sigma + k, sigma, 1) = sys.dGamma(k) * vstar - sys.dB(k) * sys.Vs();
            J.block(sigma, sigma + k, n, 1) = sys.dGamma(k).transpose() * I;
        }
        Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible())
            throw SingularSystem("network setpoint Newton hit a singular Jacobian");
        const Vec step = lu.solve(-r);
        I += step.head(sigma);
        u += step.tail(n);
    }
    const Vec r = residual(I, u);
    if (r.cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw NoFeasibleInput("network setpoint Newton did not converge");
    if (!((u.array() > 0.0).all() && (u.array() < 1.0).all()))
        throw NoFeasibleInput("network setpoint requires interior duty cycles");

    return Setpoint{I, vstar, u};
}

}  // namespace bmsim
