#include "softbot/cppn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace softbot {

double activate(ActivationKind kind, double u) {
    switch (kind) {
    case ActivationKind::Sigmoid:
        return 1.0 / (1.0 + std::exp(-u));
    case ActivationKind::Sine:
        return std::sin(u);
    case ActivationKind::Abs:
        return std::fabs(u);
    case ActivationKind::NegAbs:
        return -std::fabs(u);
    case ActivationKind::Square:
        return u * u;
    case ActivationKind::NegSquare:
        return -(u * u);
    case ActivationKind::Sqrt:
        return std::copysign(std::sqrt(std::fabs(u)), u);
    case ActivationKind::NegSqrt:
        return -std::copysign(std::sqrt(std::fabs(u)), u);
    }
    return 0.0;
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Sine: return "sine";
    case ActivationKind::Abs: return "abs";
    case ActivationKind::NegAbs: return "neg_abs";
    case ActivationKind::Square: return "square";
    case ActivationKind::NegSquare: return "neg_square";
    case ActivationKind::Sqrt: return "sqrt";
    case ActivationKind::NegSqrt: return "neg_sqrt";
    }
    return "?";
}

std::optional<ActivationKind> parse_activation(std::string_view name) {
    for (auto k : kAllActivations) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::Input: return "input";
    case NodeKind::Hidden: return "hidden";
    case NodeKind::Output: return "output";
    }
    return "?";
}

std::string_view to_string(InputLabel label) {
    switch (label) {
    case InputLabel::X: return "x";
    case InputLabel::Y: return "y";
    case InputLabel::Z: return "z";
    case InputLabel::R: return "r";
    case InputLabel::Bias: return "bias";
    }
    return "?";
}

std::string_view to_string(OutputLabel label) {
    switch (label) {
    case OutputLabel::Presence: return "presence";
    case OutputLabel::Material: return "material";
    case OutputLabel::Phase: return "phase";
    case OutputLabel::Frequency: return "frequency";
    }
    return "?";
}

std::string_view to_string(GenomeKind kind) {
    return kind == GenomeKind::Morphology ? "morphology" : "controller";
}

std::string_view to_string(MutationOp op) {
    switch (op) {
    case MutationOp::PerturbWeight: return "perturb_weight";
    case MutationOp::ChangeActivation: return "change_activation";
    case MutationOp::AddEdge: return "add_edge";
    case MutationOp::RemoveEdge: return "remove_edge";
    case MutationOp::AddNode: return "add_node";
    case MutationOp::RemoveNode: return "remove_node";
    }
    return "?";
}

std::array<OutputLabel, 2> required_outputs(GenomeKind kind) {
    if (kind == GenomeKind::Morphology) {
        return {OutputLabel::Presence, OutputLabel::Material};
    }
    return {OutputLabel::Phase, OutputLabel::Frequency};
}

CppnNode CppnNode::make_input(int id, InputLabel label) {
    CppnNode n;
    n.id = id;
    n.kind = NodeKind::Input;
    n.input = label;
    return n;
}

CppnNode CppnNode::make_hidden(int id, ActivationKind act) {
    CppnNode n;
    n.id = id;
    n.kind = NodeKind::Hidden;
    n.activation = act;
    return n;
}

CppnNode CppnNode::make_output(int id, OutputLabel label, ActivationKind act) {
    CppnNode n;
    n.id = id;
    n.kind = NodeKind::Output;
    n.output = label;
    n.activation = act;
    return n;
}

const CppnNode* CppnGenome::find(int id) const {
    for (const auto& n : nodes) {
        if (n.id == id) {
            return &n;
        }
    }
    return nullptr;
}

std::size_t CppnGenome::hidden_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const CppnNode& n) { return n.kind == NodeKind::Hidden; }));
}

namespace {

// Kahn's algorithm over node indices; returns nullopt on a cycle. Ties are
// resolved by node position so the order is deterministic.
std::optional<std::vector<std::size_t>> topological_order(const CppnGenome& g) {
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        index.emplace(g.nodes[i].id, i);
    }
    std::vector<std::size_t> indegree(g.nodes.size(), 0);
    std::vector<std::vector<std::size_t>> out(g.nodes.size());
    for (const auto& e : g.edges) {
        auto s = index.find(e.source);
        auto t = index.find(e.target);
        if (s == index.end() || t == index.end()) {
            return std::nullopt;
        }
        out[s->second].push_back(t->second);
        ++indegree[t->second];
    }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < indegree.size(); ++i) {
        if (indegree[i] == 0) {
            ready.insert(i);
        }
    }
    std::vector<std::size_t> order;
    order.reserve(g.nodes.size());
    while (!ready.empty()) {
        const std::size_t i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (auto j : out[i]) {
            if (--indegree[j] == 0) {
                ready.insert(j);
            }
        }
    }
    if (order.size() != g.nodes.size()) {
        return std::nullopt;
    }
    return order;
}

bool has_path(const CppnGenome& g, int from, int to) {
    std::vector<int> stack{from};
    std::set<int> seen;
    while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        if (cur == to) {
            return true;
        }
        if (!seen.insert(cur).second) {
            continue;
        }
        for (const auto& e : g.edges) {
            if (e.source == cur) {
                stack.push_back(e.target);
            }
        }
    }
    return false;
}

double clamp_weight(double w, double limit) {
    return std::clamp(w, -limit, limit);
}

ActivationKind random_activation(Rng& rng) {
    return kAllActivations[rng.index(kAllActivations.size())];
}

}  // namespace

std::vector<std::string> validate(const CppnGenome& genome, double weight_limit) {
    std::vector<std::string> violations;
    std::set<int> ids;
    for (const auto& n : genome.nodes) {
        if (!ids.insert(n.id).second) {
            violations.push_back("duplicate node id " + std::to_string(n.id));
        }
        if (n.id >= genome.next_id) {
            violations.push_back("node id " + std::to_string(n.id) + " not below next_id");
        }
        switch (n.kind) {
        case NodeKind::Input:
            if (n.activation || !n.input || n.output) {
                violations.push_back("malformed input node " + std::to_string(n.id));
            }
            break;
        case NodeKind::Hidden:
            if (!n.activation || n.input || n.output) {
                violations.push_back("malformed hidden node " + std::to_string(n.id));
            }
            break;
        case NodeKind::Output:
            if (!n.activation || n.input || !n.output) {
                violations.push_back("malformed output node " + std::to_string(n.id));
            }
            break;
        }
    }

    for (auto label : kAllInputs) {
        auto count = std::count_if(genome.nodes.begin(), genome.nodes.end(), [&](const CppnNode& n) {
            return n.kind == NodeKind::Input && n.input == label;
        });
        if (count == 0) {
            violations.push_back("missing input " + std::string(to_string(label)));
        } else if (count > 1) {
            violations.push_back("duplicate input " + std::string(to_string(label)));
        }
    }
    const auto required = required_outputs(genome.kind);
    for (auto label : required) {
        auto count = std::count_if(genome.nodes.begin(), genome.nodes.end(), [&](const CppnNode& n) {
            return n.kind == NodeKind::Output && n.output == label;
        });
        if (count == 0) {
            violations.push_back("missing output " + std::string(to_string(label)));
        } else if (count > 1) {
            violations.push_back("duplicate output " + std::string(to_string(label)));
        }
    }
    for (const auto& n : genome.nodes) {
        if (n.kind == NodeKind::Output && n.output && *n.output != required[0] && *n.output != required[1]) {
            violations.push_back("unexpected output " + std::string(to_string(*n.output)));
        }
    }

    bool dangling = false;
    std::set<std::pair<int, int>> pairs;
    for (const auto& e : genome.edges) {
        const CppnNode* s = genome.find(e.source);
        const CppnNode* t = genome.find(e.target);
        if (s == nullptr || t == nullptr) {
            violations.push_back("dangling edge " + std::to_string(e.source) + "->" + std::to_string(e.target));
            dangling = true;
            continue;
        }
        if (t->kind == NodeKind::Input) {
            violations.push_back("edge into input " + std::to_string(e.target));
        }
        if (s->kind == NodeKind::Output) {
            violations.push_back("edge out of output " + std::to_string(e.source));
        }
        if (!std::isfinite(e.weight) || std::fabs(e.weight) > weight_limit) {
            violations.push_back("weight out of bounds on " + std::to_string(e.source) + "->" +
                                 std::to_string(e.target));
        }
        if (!pairs.emplace(e.source, e.target).second) {
            violations.push_back("duplicate edge " + std::to_string(e.source) + "->" + std::to_string(e.target));
        }
    }
    if (!dangling && !topological_order(genome)) {
        violations.push_back("cycle");
    }
    return violations;
}

CompiledCppn::CompiledCppn(const CppnGenome& genome) {
    if (auto v = validate(genome); !v.empty()) {
        throw GenomeError("invalid genome: " + v.front());
    }
    auto order = *topological_order(genome);

    std::vector<std::size_t> inputs;
    std::vector<std::size_t> rest;
    for (auto i : order) {
        (genome.nodes[i].kind == NodeKind::Input ? inputs : rest).push_back(i);
    }
    input_count_ = inputs.size();
    std::unordered_map<int, std::uint32_t> slot;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        input_labels_[k] = *genome.nodes[inputs[k]].input;
        slot[genome.nodes[inputs[k]].id] = static_cast<std::uint32_t>(k);
    }
    for (std::size_t k = 0; k < rest.size(); ++k) {
        slot[genome.nodes[rest[k]].id] = static_cast<std::uint32_t>(input_count_ + k);
    }
    const auto required = required_outputs(genome.kind);
    for (auto i : rest) {
        const auto& node = genome.nodes[i];
        Step step{*node.activation, static_cast<std::uint32_t>(incoming_.size()), 0};
        for (const auto& e : genome.edges) {
            if (e.target == node.id) {
                incoming_.push_back({slot.at(e.source), e.weight});
                ++step.in_count;
            }
        }
        steps_.push_back(step);
        if (node.kind == NodeKind::Output) {
            output_slots_[*node.output == required[0] ? 0 : 1] = slot.at(node.id);
        }
    }
}

std::array<double, 2> CompiledCppn::raw(const Coords& c) const {
    thread_local std::vector<double> values;
    values.assign(input_count_ + steps_.size(), 0.0);
    for (std::size_t k = 0; k < input_count_; ++k) {
        switch (input_labels_[k]) {
        case InputLabel::X: values[k] = c.x; break;
        case InputLabel::Y: values[k] = c.y; break;
        case InputLabel::Z: values[k] = c.z; break;
        case InputLabel::R: values[k] = c.r; break;
        case InputLabel::Bias: values[k] = 1.0; break;
        }
    }
    for (std::size_t s = 0; s < steps_.size(); ++s) {
        const Step& step = steps_[s];
        double sum = 0.0;
        for (std::uint32_t k = 0; k < step.in_count; ++k) {
            const Incoming& in = incoming_[step.first_in + k];
            sum += in.weight * values[in.source_slot];
        }
        values[input_count_ + s] = activate(step.activation, sum);
    }
    return {values[output_slots_[0]], values[output_slots_[1]]};
}

std::array<double, 2> CompiledCppn::operator()(const Coords& c) const {
    auto out = raw(c);
    return {std::tanh(out[0]), std::tanh(out[1])};
}

std::vector<double> evaluate(const CppnGenome& genome, const Coords& coords) {
    auto out = CompiledCppn(genome)(coords);
    return {out[0], out[1]};
}

std::vector<double> evaluate_raw(const CppnGenome& genome, const Coords& coords) {
    auto out = CompiledCppn(genome).raw(coords);
    return {out[0], out[1]};
}

CppnGenome random_minimal(GenomeKind kind, Rng& rng) {
    CppnGenome g;
    g.kind = kind;
    int id = 0;
    for (auto label : kAllInputs) {
        g.nodes.push_back(CppnNode::make_input(id++, label));
    }
    for (auto label : required_outputs(kind)) {
        const int out_id = id++;
        g.nodes.push_back(CppnNode::make_output(out_id, label, random_activation(rng)));
        std::vector<int> sources;
        for (int in = 0; in < static_cast<int>(kAllInputs.size()); ++in) {
            if (rng.bernoulli(0.5)) {
                sources.push_back(in);
            }
        }
        if (sources.empty()) {
            sources.push_back(static_cast<int>(rng.index(kAllInputs.size())));
        }
        for (int s : sources) {
            g.edges.push_back({s, out_id, clamp_weight(rng.normal(0.0, 1.0), kDefaultWeightLimit)});
        }
    }
    g.next_id = id;
    return g;
}

MutationOp MutationRates::draw(Rng& rng) const {
    const std::array<std::pair<double, MutationOp>, 6> table = {{
        {perturb_weight, MutationOp::PerturbWeight},
        {change_activation, MutationOp::ChangeActivation},
        {add_edge, MutationOp::AddEdge},
        {remove_edge, MutationOp::RemoveEdge},
        {add_node, MutationOp::AddNode},
        {remove_node, MutationOp::RemoveNode},
    }};
    double total = 0.0;
    for (const auto& [p, op] : table) {
        total += p;
    }
    double u = rng.uniform() * total;
    for (const auto& [p, op] : table) {
        if (u < p) {
            return op;
        }
        u -= p;
    }
    return MutationOp::PerturbWeight;
}

std::optional<CppnGenome> apply_mutation(const CppnGenome& genome, MutationOp op, Rng& rng,
                                         const MutationRates& rates) {
    CppnGenome g = genome;
    switch (op) {
    case MutationOp::PerturbWeight: {
        if (g.edges.empty()) {
            return std::nullopt;
        }
        auto& e = g.edges[rng.index(g.edges.size())];
        e.weight = clamp_weight(e.weight + rng.normal(0.0, rates.weight_sigma), rates.weight_limit);
        return g;
    }
    case MutationOp::ChangeActivation: {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (g.nodes[i].kind != NodeKind::Input) {
                candidates.push_back(i);
            }
        }
        auto& node = g.nodes[candidates[rng.index(candidates.size())]];
        std::vector<ActivationKind> others;
        for (auto k : kAllActivations) {
            if (k != *node.activation) {
                others.push_back(k);
            }
        }
        node.activation = others[rng.index(others.size())];
        return g;
    }
    case MutationOp::AddEdge: {
        std::set<std::pair<int, int>> existing;
        for (const auto& e : g.edges) {
            existing.emplace(e.source, e.target);
        }
        std::vector<std::pair<int, int>> candidates;
        for (const auto& s : g.nodes) {
            if (s.kind == NodeKind::Output) {
                continue;
            }
            for (const auto& t : g.nodes) {
                if (t.kind == NodeKind::Input || s.id == t.id || existing.contains({s.id, t.id})) {
                    continue;
                }
                if (!has_path(g, t.id, s.id)) {
                    candidates.emplace_back(s.id, t.id);
                }
            }
        }
        if (candidates.empty()) {
            return std::nullopt;
        }
        auto [s, t] = candidates[rng.index(candidates.size())];
        g.edges.push_back({s, t, clamp_weight(rng.normal(0.0, 1.0), rates.weight_limit)});
        return g;
    }
    case MutationOp::RemoveEdge: {
        if (g.edges.size() < 2) {
            return std::nullopt;
        }
        g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(rng.index(g.edges.size())));
        return g;
    }
    case MutationOp::AddNode: {
        if (g.edges.empty()) {
            return std::nullopt;
        }
        const std::size_t k = rng.index(g.edges.size());
        const CppnEdge split = g.edges[k];
        const int h = g.next_id++;
        g.nodes.push_back(CppnNode::make_hidden(h, random_activation(rng)));
        g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(k));
        g.edges.push_back({split.source, h, 1.0});
        g.edges.push_back({h, split.target, split.weight});
        return g;
    }
    case MutationOp::RemoveNode: {
        std::vector<std::size_t> hidden;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (g.nodes[i].kind == NodeKind::Hidden) {
                hidden.push_back(i);
            }
        }
        if (hidden.empty()) {
            return std::nullopt;
        }
        const std::size_t victim = hidden[rng.index(hidden.size())];
        const int id = g.nodes[victim].id;
        g.nodes.erase(g.nodes.begin() + static_cast<std::ptrdiff_t>(victim));
        std::erase_if(g.edges, [id](const CppnEdge& e) { return e.source == id || e.target == id; });
        return g;
    }
    }
    return std::nullopt;
}

MutationOutcome mutate_traced(const CppnGenome& genome, Rng& rng, const MutationRates& rates,
                              const OpSampler& sampler) {
    constexpr int kMaxResamples = 10;
    for (int attempt = 0; attempt <= kMaxResamples; ++attempt) {
        const MutationOp op = sampler ? sampler(rng) : rates.draw(rng);
        if (auto g = apply_mutation(genome, op, rng, rates)) {
            return {std::move(*g), op};
        }
    }
    if (auto g = apply_mutation(genome, MutationOp::PerturbWeight, rng, rates)) {
        return {std::move(*g), MutationOp::PerturbWeight};
    }
    // No edges at all: growing one is the only change available.
    auto g = apply_mutation(genome, MutationOp::AddEdge, rng, rates);
    return {std::move(*g), MutationOp::AddEdge};
}

std::string to_text(const CppnGenome& genome) {
    std::ostringstream os;
    os << "cppn 1 " << to_string(genome.kind) << '\n';
    os << "next_id " << genome.next_id << '\n';
    for (const auto& n : genome.nodes) {
        os << "node " << n.id << ' ' << to_string(n.kind);
        switch (n.kind) {
        case NodeKind::Input:
            os << ' ' << to_string(*n.input);
            break;
        case NodeKind::Hidden:
            os << ' ' << to_string(*n.activation);
            break;
        case NodeKind::Output:
            os << ' ' << to_string(*n.output) << ' ' << to_string(*n.activation);
            break;
        }
        os << '\n';
    }
    char buf[64];
    for (const auto& e : genome.edges) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        os << "edge " << e.source << ' ' << e.target << ' ' << buf << '\n';
    }
    os << "end\n";
    return os.str();
}

CppnGenome from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    CppnGenome g;
    bool header = false;
    bool ended = false;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw GenomeError("genome text line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (!header) {
            int version = 0;
            std::string kind;
            if (tag != "cppn" || !(ls >> version >> kind) || version != 1) {
                fail("expected 'cppn 1 <kind>' header");
            }
            if (kind == "morphology") {
                g.kind = GenomeKind::Morphology;
            } else if (kind == "controller") {
                g.kind = GenomeKind::Controller;
            } else {
                fail("unknown genome kind '" + kind + "'");
            }
            header = true;
        } else if (tag == "next_id") {
            if (!(ls >> g.next_id)) {
                fail("bad next_id");
            }
        } else if (tag == "node") {
            int id = 0;
            std::string kind;
            std::string a;
            std::string b;
            if (!(ls >> id >> kind >> a)) {
                fail("bad node record");
            }
            if (kind == "input") {
                std::optional<InputLabel> label;
                for (auto l : kAllInputs) {
                    if (to_string(l) == a) {
                        label = l;
                    }
                }
                if (!label) {
                    fail("unknown input label '" + a + "'");
                }
                g.nodes.push_back(CppnNode::make_input(id, *label));
            } else if (kind == "hidden") {
                auto act = parse_activation(a);
                if (!act) {
                    fail("unknown activation '" + a + "'");
                }
                g.nodes.push_back(CppnNode::make_hidden(id, *act));
            } else if (kind == "output") {
                if (!(ls >> b)) {
                    fail("output node needs label and activation");
                }
                std::optional<OutputLabel> label;
                for (auto l : {OutputLabel::Presence, OutputLabel::Material, OutputLabel::Phase,
                               OutputLabel::Frequency}) {
                    if (to_string(l) == a) {
                        label = l;
                    }
                }
                auto act = parse_activation(b);
                if (!label || !act) {
                    fail("bad output node");
                }
                g.nodes.push_back(CppnNode::make_output(id, *label, *act));
            } else {
                fail("unknown node kind '" + kind + "'");
            }
        } else if (tag == "edge") {
            CppnEdge e;
            std::string w;
            if (!(ls >> e.source >> e.target >> w)) {
                fail("bad edge record");
            }
            e.weight = std::strtod(w.c_str(), nullptr);
            g.edges.push_back(e);
        } else if (tag == "end") {
            ended = true;
            break;
        } else {
            fail("unknown record '" + tag + "'");
        }
    }
    if (!header || !ended) {
        throw GenomeError("genome text truncated");
    }
    if (auto v = validate(g); !v.empty()) {
        throw GenomeError("deserialized genome invalid: " + v.front());
    }
    return g;
}

}  // namespace softbot
