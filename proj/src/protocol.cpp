#include "qleak/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "qleak/io.hpp"

namespace qleak {

namespace {

Party owner_from_label(const std::string& label, std::size_t line) {
  if (label[0] == 'A' || label[0] == 'a') return Party::Alice;
  if (label[0] == 'B' || label[0] == 'b') return Party::Bob;
  fail(Errc::ValidationError,
       "line " + std::to_string(line) + ": register " + label +
           " must start with A/a (Alice) or B/b (Bob) to fix its owner");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_num(const std::string& tok, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(res.ec == std::errc{} && res.ptr == tok.data() + tok.size(), Errc::ParseError,
          "line " + std::to_string(line) + ": bad number " + tok);
  return v;
}

struct Attr {
  std::string key;
  std::string value;
};

// splits "key=value" tokens; plain tokens get an empty key
std::vector<Attr> parse_attrs(const std::vector<std::string>& toks, std::size_t from) {
  std::vector<Attr> out;
  for (std::size_t i = from; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos) {
      out.push_back({"", toks[i]});
    } else {
      out.push_back({toks[i].substr(0, eq), toks[i].substr(eq + 1)});
    }
  }
  return out;
}

// Either a plain channel or a controlled family, instantiated for the given
// target dimensions.
struct ResolvedOp {
  std::optional<KrausChannel> plain;
  std::optional<ControlledChannel> controlled;
};

ResolvedOp resolve_op(const ProtoStep& step, const SystemLayout& current,
                      const std::string& base_dir) {
  std::size_t tdim = 1;
  for (const std::string& t : step.targets) tdim *= current[current.index_of(t)].dim;
  ResolvedOp out;
  if (step.gate.rfind("file:", 0) == 0) {
    const std::string path = base_dir + "/" + step.gate.substr(5);
    KrausChannel ch = load_kraus(path);
    require(step.control.empty(), Errc::ValidationError,
            "file channels cannot be classically controlled: " + step.gate);
    out.plain = std::move(ch);
    return out;
  }
  require(is_standard_gate(step.gate), Errc::UnknownGate, step.gate);
  if (step.control.empty()) {
    out.plain = standard_gate(step.gate, tdim);
  } else {
    const std::size_t cdim = current[current.index_of(step.control)].dim;
    out.controlled = controlled_gate(step.gate, cdim, tdim);
  }
  return out;
}

// Layout/ownership walker shared by the validator, comm_stats and the
// runner-independent checks. Calls the visitor before each step is applied.
struct WalkState {
  SystemLayout layout;
  std::map<std::string, Party> owner;
};

void walk_steps(const ProtocolSpec& spec,
                const std::function<void(const ProtoStep&, const WalkState&)>& before,
                WalkState* final_state = nullptr) {
  WalkState st{spec.layout, spec.owner};
  for (const ProtoStep& step : spec.steps) {
    if (before) before(step, st);
    if (step.kind == ProtoStep::Kind::Send) {
      for (const std::string& l : step.payload) st.owner[l] = step.party == Party::Alice
                                                                  ? Party::Bob
                                                                  : Party::Alice;
      continue;
    }
    ResolvedOp op = resolve_op(step, st.layout, spec.base_dir);
    const std::vector<OutputFactor>& factors =
        op.plain ? op.plain->output_factors : op.controlled->branches.front().output_factors;
    std::vector<std::string> outs = step.outs;
    if (outs.empty()) outs = step.targets;
    const bool unsplit_square =
        factors.size() == 1 && !factors.front().classical &&
        (op.plain ? op.plain->input_dim == op.plain->output_dim
                  : op.controlled->branches.front().input_dim ==
                        op.controlled->branches.front().output_dim);
    std::vector<Subsystem> new_subs;
    if (factors.size() == outs.size() || (unsplit_square && outs.size() == step.targets.size())) {
      for (std::size_t f = 0; f < outs.size(); ++f) {
        const std::size_t dim = factors.size() == outs.size()
                                    ? factors[f].dim
                                    : st.layout[st.layout.index_of(step.targets[f])].dim;
        const bool cls = factors.size() == outs.size()
                             ? factors[f].classical
                             : st.layout[st.layout.index_of(step.targets[f])].classical;
        new_subs.push_back({outs[f], dim, cls});
      }
    } else {
      require(!step.outs.empty(), Errc::ValidationError,
              "op " + step.gate + " changes the register count; out= labels required");
      for (std::size_t f = 0; f < factors.size(); ++f)
        new_subs.push_back({step.outs[f], factors[f].dim, factors[f].classical});
    }
    // replace targets by the new registers in the layout walk
    std::vector<Subsystem> subs;
    for (std::size_t i = 0; i < st.layout.size(); ++i) {
      const std::string& l = st.layout[i].label;
      const auto it = std::find(step.targets.begin(), step.targets.end(), l);
      if (it == step.targets.end()) {
        subs.push_back(st.layout[i]);
      } else if (new_subs.size() == step.targets.size()) {
        subs.push_back(new_subs[static_cast<std::size_t>(it - step.targets.begin())]);
      } else if (l == step.targets.front()) {
        for (const Subsystem& s : new_subs) subs.push_back(s);
      }
    }
    for (const std::string& t : step.targets) st.owner.erase(t);
    for (const Subsystem& s : new_subs) st.owner[s.label] = step.party;
    st.layout = SystemLayout(std::move(subs));
  }
  if (final_state) *final_state = std::move(st);
}

void validate(const ProtocolSpec& spec) {
  require(spec.rounds >= 1, Errc::ValidationError, "protocol needs at least one round");

  // phase machine per round: Alice ops, Alice send, Bob ops, Bob send
  enum Phase { AliceOps, BobOps, Closed };
  std::size_t round = 0;
  Phase phase = Closed;
  for (const ProtoStep& step : spec.steps) {
    if (step.round != round) {
      require(step.round == round + 1, Errc::ValidationError, "rounds must be consecutive");
      round = step.round;
      phase = AliceOps;
    }
    if (step.party == Party::Alice) {
      require(phase == AliceOps, Errc::ValidationError,
              "round " + std::to_string(round) +
                  ": Alice acts before Bob within a round (Def. 2 ordering)");
      if (step.kind == ProtoStep::Kind::Send) phase = BobOps;
    } else {
      require(phase != Closed, Errc::ValidationError,
              "round " + std::to_string(round) + ": Bob already sent this round");
      if (phase == AliceOps) phase = BobOps;  // implicit empty Alice message
      if (step.kind == ProtoStep::Kind::Send) {
        require(round < spec.rounds || step.payload.empty(), Errc::ValidationError,
                "round " + std::to_string(round) +
                    ": Bob cannot send in the final round; party A sends the first and the last "
                    "messages");
        phase = Closed;
      }
    }
  }

  // ownership discipline, register existence, control rules
  walk_steps(spec, [&](const ProtoStep& step, const WalkState& st) {
    if (step.kind == ProtoStep::Kind::Send) {
      for (const std::string& l : step.payload) {
        const auto it = st.owner.find(l);
        require(it != st.owner.end(), Errc::UnknownLabel, "send of unknown register " + l);
        require(it->second == step.party, Errc::ValidationError,
                party_name(step.party) + std::string(" cannot send unowned register ") + l);
        require(l != spec.classical_input_label, Errc::ValidationError,
                "the classical input register is preserved and cannot be sent");
      }
      return;
    }
    require(!step.targets.empty(), Errc::ValidationError, "op without targets");
    for (const std::string& t : step.targets) {
      const auto it = st.owner.find(t);
      require(it != st.owner.end(), Errc::UnknownLabel, "op on unknown register " + t);
      require(it->second == step.party, Errc::ValidationError,
              party_name(step.party) + std::string(" cannot act on unowned register ") + t);
      require(t != spec.classical_input_label, Errc::ValidationError,
              "the classical input register is preserved; ops cannot target it");
    }
    if (!step.control.empty()) {
      const auto it = st.owner.find(step.control);
      require(it != st.owner.end(), Errc::UnknownLabel, "unknown control " + step.control);
      require(it->second == step.party, Errc::ValidationError, "control must be owned");
      require(st.layout[st.layout.index_of(step.control)].classical, Errc::NotClassicalControl,
              "control register " + step.control + " is not classical");
      if (step.party == Party::Alice)
        require(step.control == spec.classical_input_label, Errc::ValidationError,
                "Alice's operations are controlled by her classical input register");
    }
    // instantiating the op validates gate names, shapes and CPTP-ness
    resolve_op(step, st.layout, spec.base_dir);
  });

  // input clauses reference declared registers, each covered at most once
  std::map<std::string, int> covered;
  for (const InputClause& c : spec.inputs)
    for (const std::string& l : c.labels) {
      spec.layout.index_of(l);
      require(++covered[l] == 1, Errc::ValidationError,
              "register " + l + " initialized by more than one input clause");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// parser / printer
// ---------------------------------------------------------------------------

ProtocolSpec parse_protocol(const std::string& text, const std::string& base_dir) {
  ProtocolSpec spec;
  spec.base_dir = base_dir;
  std::vector<Subsystem> subs;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t round = 0;
  bool seen_protocol = false;

  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (toks.empty()) continue;
    const std::string& head = toks[0];

    if (head == "protocol") {
      require(toks.size() == 2, Errc::ParseError, "line " + std::to_string(lineno) + ": protocol <name>");
      spec.name = toks[1];
      seen_protocol = true;
    } else if (head == "system") {
      require(seen_protocol, Errc::ParseError, "line " + std::to_string(lineno) + ": missing protocol header");
      require(toks.size() >= 2, Errc::ParseError, "line " + std::to_string(lineno) + ": system <label> dim=<n> [classical]");
      Subsystem s;
      s.label = toks[1];
      bool have_dim = false;
      for (const Attr& a : parse_attrs(toks, 2)) {
        if (a.key == "dim") {
          s.dim = static_cast<std::size_t>(parse_num(a.value, lineno));
          have_dim = true;
        } else if (a.key.empty() && a.value == "classical") {
          s.classical = true;
        } else {
          fail(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown attribute " + a.value);
        }
      }
      require(have_dim, Errc::ParseError, "line " + std::to_string(lineno) + ": system needs dim=<n>");
      spec.owner[s.label] = owner_from_label(s.label, lineno);
      subs.push_back(std::move(s));
    } else if (head == "input") {
      require(toks.size() >= 2, Errc::ParseError, "line " + std::to_string(lineno) + ": input <kind> ...");
      InputClause c;
      const std::string& kind = toks[1];
      if (kind == "uniform") {
        require(toks.size() == 3, Errc::ParseError, "line " + std::to_string(lineno) + ": input uniform <label>");
        c.kind = InputClause::Kind::Uniform;
        c.labels = {toks[2]};
      } else if (kind == "basis") {
        require(toks.size() == 4, Errc::ParseError, "line " + std::to_string(lineno) + ": input basis <label> <k>");
        c.kind = InputClause::Kind::Basis;
        c.labels = {toks[2]};
        c.basis_index = static_cast<std::size_t>(parse_num(toks[3], lineno));
      } else if (kind == "epr") {
        require(toks.size() >= 4 && toks.size() % 2 == 0, Errc::ParseError,
                "line " + std::to_string(lineno) + ": input epr <labelA> <labelB> [pairs...]");
        c.kind = InputClause::Kind::Epr;
        c.labels.assign(toks.begin() + 2, toks.end());
      } else if (kind == "file") {
        require(toks.size() == 3, Errc::ParseError, "line " + std::to_string(lineno) + ": input file <path>");
        c.kind = InputClause::Kind::File;
        c.state_files = {toks[2]};
        // labels resolved when the file is loaded
      } else if (kind == "cq") {
        require(toks.size() >= 4, Errc::ParseError,
                "line " + std::to_string(lineno) + ": input cq <label> weights=... [states=...]");
        c.kind = InputClause::Kind::Cq;
        c.labels = {toks[2]};
        for (const Attr& a : parse_attrs(toks, 3)) {
          if (a.key == "weights") {
            if (a.value == "uniform") {
              c.weights.clear();  // resolved against the register dim later
            } else {
              for (const std::string& w : split_commas(a.value)) c.weights.push_back(parse_num(w, lineno));
            }
          } else if (a.key == "states") {
            c.state_files = split_commas(a.value);
          } else {
            fail(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown attribute " + a.key);
          }
        }
      } else {
        fail(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown input kind " + kind);
      }
      spec.inputs.push_back(std::move(c));
    } else if (head == "round") {
      require(toks.size() == 2, Errc::ParseError, "line " + std::to_string(lineno) + ": round <i>");
      const std::size_t r = static_cast<std::size_t>(parse_num(toks[1], lineno));
      require(r == round + 1, Errc::ParseError,
              "line " + std::to_string(lineno) + ": rounds must be declared consecutively");
      round = r;
      spec.rounds = r;
    } else if (head == "alice" || head == "bob") {
      require(round >= 1, Errc::ParseError, "line " + std::to_string(lineno) + ": step before any round");
      require(toks.size() >= 2, Errc::ParseError, "line " + std::to_string(lineno) + ": truncated step");
      ProtoStep step;
      step.party = head == "alice" ? Party::Alice : Party::Bob;
      step.round = round;
      if (toks[1] == "send") {
        step.kind = ProtoStep::Kind::Send;
        step.payload.assign(toks.begin() + 2, toks.end());
      } else {
        step.kind = ProtoStep::Kind::Op;
        for (const Attr& a : parse_attrs(toks, 1)) {
          if (a.key == "op") {
            step.gate = a.value;
          } else if (a.key == "targets") {
            step.targets = split_commas(a.value);
          } else if (a.key == "control") {
            step.control = a.value;
          } else if (a.key == "out") {
            step.outs = split_commas(a.value);
          } else {
            fail(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown attribute " +
                                       (a.key.empty() ? a.value : a.key));
          }
        }
        require(!step.gate.empty(), Errc::ParseError, "line " + std::to_string(lineno) + ": step needs op=<gate>");
      }
      spec.steps.push_back(std::move(step));
    } else {
      fail(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown directive " + head);
    }
  }
  require(seen_protocol, Errc::ParseError, "missing 'protocol <name>' header");
  spec.layout = SystemLayout(std::move(subs));

  // resolve input-file labels and uniform cq weights
  for (InputClause& c : spec.inputs) {
    if (c.kind == InputClause::Kind::File) {
      DensityOperator st = load_state(spec.base_dir + "/" + c.state_files[0]);
      for (const Subsystem& s : st.layout.subsystems()) c.labels.push_back(s.label);
    } else if (c.kind == InputClause::Kind::Cq && c.weights.empty()) {
      const std::size_t dim = spec.layout[spec.layout.index_of(c.labels[0])].dim;
      c.weights.assign(dim, 1.0 / static_cast<double>(dim));
    }
    if (c.kind == InputClause::Kind::Cq && !c.state_files.empty()) {
      // conditional states extend the clause coverage
      DensityOperator first = load_state(spec.base_dir + "/" + c.state_files[0]);
      for (const Subsystem& s : first.layout.subsystems()) c.labels.push_back(s.label);
    }
  }

  // the preserved classical input: Alice's declared classical register
  std::vector<std::string> alice_classical;
  for (const Subsystem& s : spec.layout.subsystems())
    if (s.classical && spec.owner.at(s.label) == Party::Alice) alice_classical.push_back(s.label);
  require(alice_classical.size() <= 1, Errc::ValidationError,
          "at most one classical input register on Alice's side");
  if (!alice_classical.empty()) spec.classical_input_label = alice_classical.front();

  validate(spec);
  return spec;
}

namespace {

void print_double(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

std::string print_protocol(const ProtocolSpec& spec) {
  std::ostringstream os;
  os << "protocol " << spec.name << '\n';
  for (const Subsystem& s : spec.layout.subsystems()) {
    os << "system " << s.label << " dim=" << s.dim;
    if (s.classical) os << " classical";
    os << '\n';
  }
  for (const InputClause& c : spec.inputs) {
    switch (c.kind) {
      case InputClause::Kind::Uniform:
        os << "input uniform " << c.labels[0] << '\n';
        break;
      case InputClause::Kind::Basis:
        os << "input basis " << c.labels[0] << ' ' << c.basis_index << '\n';
        break;
      case InputClause::Kind::Epr:
        os << "input epr";
        for (const std::string& l : c.labels) os << ' ' << l;
        os << '\n';
        break;
      case InputClause::Kind::File:
        os << "input file " << c.state_files[0] << '\n';
        break;
      case InputClause::Kind::Cq: {
        os << "input cq " << c.labels[0] << " weights=";
        for (std::size_t i = 0; i < c.weights.size(); ++i) {
          if (i) os << ',';
          print_double(os, c.weights[i]);
        }
        if (!c.state_files.empty()) {
          os << " states=";
          for (std::size_t i = 0; i < c.state_files.size(); ++i) {
            if (i) os << ',';
            os << c.state_files[i];
          }
        }
        os << '\n';
        break;
      }
    }
  }
  std::size_t round = 0;
  for (const ProtoStep& step : spec.steps) {
    if (step.round != round) {
      round = step.round;
      os << "round " << round << '\n';
    }
    os << party_name(step.party);
    if (step.kind == ProtoStep::Kind::Send) {
      os << " send";
      for (const std::string& l : step.payload) os << ' ' << l;
    } else {
      os << " op=" << step.gate << " targets=";
      for (std::size_t i = 0; i < step.targets.size(); ++i) {
        if (i) os << ',';
        os << step.targets[i];
      }
      if (!step.control.empty()) os << " control=" << step.control;
      if (!step.outs.empty()) {
        os << " out=";
        for (std::size_t i = 0; i < step.outs.size(); ++i) {
          if (i) os << ',';
          os << step.outs[i];
        }
      }
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// input assembly
// ---------------------------------------------------------------------------

DensityOperator build_input(const ProtocolSpec& spec) {
  struct Factor {
    std::vector<std::string> labels;
    ComplexMatrix matrix;
  };
  std::vector<Factor> factors;
  std::vector<std::string> covered;

  for (const InputClause& c : spec.inputs) {
    Factor f;
    switch (c.kind) {
      case InputClause::Kind::Uniform: {
        const std::size_t d = spec.layout[spec.layout.index_of(c.labels[0])].dim;
        ComplexMatrix m(d, d);
        for (std::size_t i = 0; i < d; ++i) m.at(i, i) = 1.0 / static_cast<double>(d);
        f = {c.labels, std::move(m)};
        break;
      }
      case InputClause::Kind::Basis: {
        const std::size_t d = spec.layout[spec.layout.index_of(c.labels[0])].dim;
        require(c.basis_index < d, Errc::ValidationError, "basis index out of range");
        ComplexMatrix m(d, d);
        m.at(c.basis_index, c.basis_index) = 1.0;
        f = {c.labels, std::move(m)};
        break;
      }
      case InputClause::Kind::Epr: {
        ComplexMatrix m(1, 1);
        m.at(0, 0) = 1.0;
        for (std::size_t p = 0; p + 1 < c.labels.size(); p += 2) {
          const std::size_t d1 = spec.layout[spec.layout.index_of(c.labels[p])].dim;
          const std::size_t d2 = spec.layout[spec.layout.index_of(c.labels[p + 1])].dim;
          require(d1 == d2, Errc::DimMismatch, "epr pair dims differ");
          std::vector<Cx> amp(d1 * d1, Cx{});
          const double r = 1.0 / std::sqrt(static_cast<double>(d1));
          for (std::size_t i = 0; i < d1; ++i) amp[i * d1 + i] = r;
          ComplexMatrix pair(d1 * d1, d1 * d1);
          for (std::size_t i = 0; i < amp.size(); ++i)
            for (std::size_t j = 0; j < amp.size(); ++j)
              pair.at(i, j) = amp[i] * std::conj(amp[j]);
          m = kron(m, pair);
        }
        f = {c.labels, std::move(m)};
        break;
      }
      case InputClause::Kind::File: {
        DensityOperator st = load_state(spec.base_dir + "/" + c.state_files[0]);
        f = {c.labels, st.matrix};
        break;
      }
      case InputClause::Kind::Cq: {
        const std::size_t d = spec.layout[spec.layout.index_of(c.labels[0])].dim;
        require(c.weights.size() <= d, Errc::WeightMismatch, "more weights than control symbols");
        if (c.state_files.empty()) {
          ComplexMatrix m(d, d);
          for (std::size_t i = 0; i < c.weights.size(); ++i) m.at(i, i) = c.weights[i];
          f = {c.labels, std::move(m)};
        } else {
          require(c.state_files.size() == c.weights.size(), Errc::WeightMismatch,
                  "cq clause needs one state file per weight");
          std::vector<DensityOperator> cond;
          for (const std::string& path : c.state_files)
            cond.push_back(load_state(spec.base_dir + "/" + path));
          const std::size_t dc = cond.front().dim();
          ComplexMatrix m(d * dc, d * dc);
          for (std::size_t a = 0; a < c.weights.size(); ++a) {
            require(cond[a].layout == cond.front().layout, Errc::LayoutMismatch,
                    "cq conditional layouts differ");
            for (std::size_t i = 0; i < dc; ++i)
              for (std::size_t j = 0; j < dc; ++j)
                m.at(a * dc + i, a * dc + j) = c.weights[a] * cond[a].matrix.at(i, j);
          }
          f = {c.labels, std::move(m)};
        }
        break;
      }
    }
    for (const std::string& l : f.labels) covered.push_back(l);
    factors.push_back(std::move(f));
  }

  // registers not covered by any clause start in |0><0|
  for (const Subsystem& s : spec.layout.subsystems()) {
    if (std::find(covered.begin(), covered.end(), s.label) != covered.end()) continue;
    ComplexMatrix m(s.dim, s.dim);
    m.at(0, 0) = 1.0;
    factors.push_back({{s.label}, std::move(m)});
  }

  // tensor in factor order, then permute to the declared order
  ComplexMatrix full(1, 1);
  full.at(0, 0) = 1.0;
  std::vector<std::string> order;
  for (const Factor& f : factors) {
    full = kron(full, f.matrix);
    for (const std::string& l : f.labels) order.push_back(l);
  }
  require(order.size() == spec.layout.size(), Errc::ValidationError,
          "input clauses do not cover the declared registers exactly");
  std::vector<std::size_t> cur_dims(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    cur_dims[i] = spec.layout[spec.layout.index_of(order[i])].dim;
  std::vector<std::size_t> perm;
  for (const Subsystem& s : spec.layout.subsystems()) {
    const auto it = std::find(order.begin(), order.end(), s.label);
    require(it != order.end(), Errc::ValidationError, "register not initialized: " + s.label);
    perm.push_back(static_cast<std::size_t>(it - order.begin()));
  }
  ComplexMatrix arranged = permute_matrix(full, cur_dims, perm);
  return DensityOperator::make(spec.layout, std::move(arranged));
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

std::vector<std::string> RunResult::owned_by(Party p) const {
  std::vector<std::string> out;
  for (const Subsystem& s : final_state.layout.subsystems()) {
    const auto it = final_owner.find(s.label);
    if (it != final_owner.end() && it->second == p) out.push_back(s.label);
  }
  return out;
}

namespace {

std::string step_text(const ProtoStep& step) {
  std::ostringstream os;
  os << party_name(step.party) << ' ';
  if (step.kind == ProtoStep::Kind::Send) {
    os << "send";
    for (const std::string& l : step.payload) os << ' ' << l;
  } else {
    os << step.gate;
  }
  return os.str();
}

struct Runner {
  const ProtocolSpec& spec;
  DensityOperator state;
  std::map<std::string, Party> owner;
  CommStats stats;
  std::vector<StepRecord> trace;
  ComplexMatrix input_marginal;  // of the classical input register

  explicit Runner(const ProtocolSpec& s, const DensityOperator& input)
      : spec(s), state(input), owner(s.owner) {
    require(input.layout == spec.layout, Errc::LayoutMismatch,
            "input state layout differs from the protocol's declared registers");
    stats.per_round.assign(spec.rounds, {0.0, 0.0});
    if (!spec.classical_input_label.empty())
      input_marginal = partial_trace(state, {spec.classical_input_label}).matrix;
  }

  void apply_step(const ProtoStep& step) {
    if (step.kind == ProtoStep::Kind::Send) {
      double bits = 0.0;
      for (const std::string& l : step.payload) {
        bits += std::log2(static_cast<double>(state.layout[state.layout.index_of(l)].dim));
        owner[l] = step.party == Party::Alice ? Party::Bob : Party::Alice;
      }
      if (step.party == Party::Alice) {
        stats.m_a += bits;
        stats.per_round[step.round - 1].first += bits;
      } else {
        stats.m_b += bits;
        stats.per_round[step.round - 1].second += bits;
      }
      return;
    }
    ResolvedOp op = resolve_op(step, state.layout, spec.base_dir);
    try {
      if (op.plain) {
        state = apply(*op.plain, state, step.targets, step.outs);
      } else {
        state = apply_controlled(*op.controlled, state, step.control, step.targets, step.outs);
      }
    } catch (const Error& e) {
      throw Error(e.code(), "round " + std::to_string(step.round) + ", " + step_text(step) + ": " +
                                e.what());
    }
    for (const std::string& t : step.targets) owner.erase(t);
    const std::vector<std::string>& outs = step.outs.empty() ? step.targets : step.outs;
    for (const std::string& l : outs)
      if (state.layout.has(l)) owner[l] = step.party;

    if (!spec.classical_input_label.empty()) {
      ComplexMatrix marg = partial_trace(state, {spec.classical_input_label}).matrix;
      require(max_abs(sub(marg, input_marginal)) <= 1e-9, Errc::ValidationError,
              "classical input marginal drifted during the run");
    }
  }

  void record(std::size_t index, const ProtoStep& step) {
    trace.push_back(StepRecord{index, step.round, step.party, step.kind, step_text(step), state,
                               owner});
  }
};

}  // namespace

RunResult run(const ProtocolSpec& spec, const DensityOperator& input) {
  Runner r(spec, input);
  for (std::size_t i = 0; i < spec.steps.size(); ++i) {
    r.apply_step(spec.steps[i]);
    r.record(i, spec.steps[i]);
  }
  return RunResult{std::move(r.state), std::move(r.stats), std::move(r.trace), std::move(r.owner)};
}

DensityOperator run_prefix(const ProtocolSpec& spec, const DensityOperator& input, std::size_t k,
                           Party half) {
  require(k >= 1 && k <= spec.rounds, Errc::BadRound, "run_prefix: round out of range");
  Runner r(spec, input);
  for (const ProtoStep& step : spec.steps) {
    if (step.round > k) break;
    if (half == Party::Alice && step.round == k && step.party == Party::Bob) break;
    r.apply_step(step);
  }
  return r.state;
}

CommStats comm_stats(const ProtocolSpec& spec) {
  CommStats stats;
  stats.per_round.assign(spec.rounds, {0.0, 0.0});
  walk_steps(spec, [&](const ProtoStep& step, const WalkState& st) {
    if (step.kind != ProtoStep::Kind::Send) return;
    double bits = 0.0;
    for (const std::string& l : step.payload)
      bits += std::log2(static_cast<double>(st.layout[st.layout.index_of(l)].dim));
    if (step.party == Party::Alice) {
      stats.m_a += bits;
      stats.per_round[step.round - 1].first += bits;
    } else {
      stats.m_b += bits;
      stats.per_round[step.round - 1].second += bits;
    }
  });
  return stats;
}

// ---------------------------------------------------------------------------
// Yao decomposition
// ---------------------------------------------------------------------------

namespace {

// u applied to the registers at positions tpos (in listed order) of a pure
// vector over dims.
std::vector<Cx> apply_unitary_vec(const std::vector<Cx>& v, const std::vector<std::size_t>& dims,
                                  const std::vector<std::size_t>& tpos, const ComplexMatrix& u) {
  std::vector<std::size_t> perm = tpos;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (std::find(tpos.begin(), tpos.end(), i) == tpos.end()) perm.push_back(i);
  std::vector<Cx> work = permute_vector(v, dims, perm);
  const std::size_t du = u.rows;
  const std::size_t rest = v.size() / du;
  std::vector<Cx> out(v.size());
  // out[(i, r)] = sum_j u[i,j] work[(j, r)]
  kernels::active().gemm(u.a.data(), work.data(), out.data(), du, du, rest);
  std::vector<std::size_t> perm_dims(perm.size());
  for (std::size_t p = 0; p < perm.size(); ++p) perm_dims[p] = dims[perm[p]];
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t p = 0; p < perm.size(); ++p) inv[perm[p]] = p;
  return permute_vector(out, perm_dims, inv);
}

struct Side {
  std::vector<std::string> labels;  // global declared order
  std::vector<std::size_t> dims;
  std::vector<std::size_t> global_pos;
};

Side make_side(const SystemLayout& layout, const std::map<std::string, Party>& owner, Party p,
               const std::string& skip) {
  Side side;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const std::string& l = layout[i].label;
    if (l == skip) continue;
    if (owner.at(l) != p) continue;
    side.labels.push_back(l);
    side.dims.push_back(layout[i].dim);
    side.global_pos.push_back(i);
  }
  return side;
}

std::size_t side_dim(const Side& s) {
  std::size_t d = 1;
  for (std::size_t x : s.dims) d *= x;
  return d;
}

// tensor-merge two vectors living on disjoint global positions into the
// combined ascending-position order
std::vector<Cx> tensor_merge(const std::vector<Cx>& va, const Side& a, const std::vector<Cx>& vb,
                             const Side& b) {
  struct Slot {
    std::size_t global;
    bool from_a;
    std::size_t local;
    std::size_t dim;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < a.global_pos.size(); ++i)
    slots.push_back({a.global_pos[i], true, i, a.dims[i]});
  for (std::size_t i = 0; i < b.global_pos.size(); ++i)
    slots.push_back({b.global_pos[i], false, i, b.dims[i]});
  std::sort(slots.begin(), slots.end(), [](const Slot& x, const Slot& y) {
    return x.global < y.global;
  });
  std::size_t total = 1;
  for (const Slot& s : slots) total *= s.dim;
  std::vector<std::size_t> astr(a.dims.size(), 1), bstr(b.dims.size(), 1);
  for (std::size_t i = a.dims.size(); i-- > 1;) astr[i - 1] = astr[i] * a.dims[i];
  for (std::size_t i = b.dims.size(); i-- > 1;) bstr[i - 1] = bstr[i] * b.dims[i];
  std::vector<Cx> out(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    std::size_t ia = 0, ib = 0;
    std::size_t div = total;
    for (const Slot& s : slots) {
      div /= s.dim;
      const std::size_t digit = rest / div;
      rest %= div;
      if (s.from_a) {
        ia += digit * astr[s.local];
      } else {
        ib += digit * bstr[s.local];
      }
    }
    out[idx] = (va.empty() ? Cx{1.0, 0.0} : va[ia]) * (vb.empty() ? Cx{1.0, 0.0} : vb[ib]);
  }
  return out;
}

Side merged_side(const Side& a, const Side& b) {
  Side out;
  std::vector<std::pair<std::size_t, std::size_t>> order;  // (global, which+index)
  for (std::size_t i = 0; i < a.global_pos.size(); ++i) order.push_back({a.global_pos[i], i});
  for (std::size_t i = 0; i < b.global_pos.size(); ++i)
    order.push_back({b.global_pos[i], a.global_pos.size() + i});
  std::sort(order.begin(), order.end());
  for (const auto& [g, idx] : order) {
    if (idx < a.global_pos.size()) {
      out.labels.push_back(a.labels[idx]);
      out.dims.push_back(a.dims[idx]);
    } else {
      out.labels.push_back(b.labels[idx - a.global_pos.size()]);
      out.dims.push_back(b.dims[idx - a.global_pos.size()]);
    }
    out.global_pos.push_back(g);
  }
  return out;
}

Side subset_side(const Side& s, const std::vector<std::string>& labels, bool keep_listed) {
  Side out;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const bool listed =
        std::find(labels.begin(), labels.end(), s.labels[i]) != labels.end();
    if (listed == keep_listed) {
      out.labels.push_back(s.labels[i]);
      out.dims.push_back(s.dims[i]);
      out.global_pos.push_back(s.global_pos[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<Cx> YaoDecomposition::reconstruct(const ProtocolSpec& spec, std::size_t x) const {
  // merge alice side, bob side, and |x> on the classical input register
  Side a, b, c;
  for (std::size_t i = 0; i < spec.layout.size(); ++i) {
    const std::string& l = spec.layout[i].label;
    if (l == spec.classical_input_label) {
      c.labels.push_back(l);
      c.dims.push_back(spec.layout[i].dim);
      c.global_pos.push_back(i);
    } else if (alice_layout.has(l)) {
      a.labels.push_back(l);
      a.dims.push_back(spec.layout[i].dim);
      a.global_pos.push_back(i);
    } else {
      b.labels.push_back(l);
      b.dims.push_back(spec.layout[i].dim);
      b.global_pos.push_back(i);
    }
  }
  std::vector<Cx> xvec(c.dims.empty() ? 0 : c.dims[0], Cx{});
  if (!xvec.empty()) xvec[x] = 1.0;
  std::vector<Cx> out(spec.layout.total_dim(), Cx{});
  for (const YaoTerm& term : terms) {
    std::vector<Cx> ab = tensor_merge(term.alice_vector, a, term.bob_vector, b);
    Side abside = merged_side(a, b);
    std::vector<Cx> full = tensor_merge(xvec, c, ab, abside);
    kernels::active().axpy(out.size(), Cx{term.coefficient, 0.0}, full.data(), out.data());
  }
  return out;
}

YaoDecomposition yao_decompose(const ProtocolSpec& spec, std::size_t x, const PureState& bob_init) {
  require(!spec.classical_input_label.empty(), Errc::NotClassicallyControlled,
          "yao_decompose needs a classical input register");
  const std::size_t xdim = spec.layout[spec.layout.index_of(spec.classical_input_label)].dim;
  require(x < xdim, Errc::BadDims, "classical input symbol out of range");

  Side alice = make_side(spec.layout, spec.owner, Party::Alice, spec.classical_input_label);
  Side bob = make_side(spec.layout, spec.owner, Party::Bob, "");

  std::vector<std::string> bob_labels = bob.labels;
  require(bob_init.layout == spec.layout.keep(bob_labels), Errc::LayoutMismatch,
          "bob_init must cover exactly Bob's declared registers");

  struct Term {
    double coef;
    std::vector<Cx> a;
    std::vector<Cx> b;
  };
  std::vector<Term> terms;
  {
    std::vector<Cx> a0(side_dim(alice), Cx{});
    if (!a0.empty()) a0[0] = 1.0;
    terms.push_back({1.0, std::move(a0), bob_init.amplitudes});
  }

  auto unitary_of = [&](const ProtoStep& step, const Side& side) {
    std::size_t tdim = 1;
    for (const std::string& t : step.targets) {
      const auto it = std::find(side.labels.begin(), side.labels.end(), t);
      require(it != side.labels.end(), Errc::UnknownLabel, "target not on this side: " + t);
      tdim *= side.dims[static_cast<std::size_t>(it - side.labels.begin())];
    }
    ComplexMatrix u;
    if (step.control.empty()) {
      KrausChannel ch = step.gate.rfind("file:", 0) == 0
                            ? load_kraus(spec.base_dir + "/" + step.gate.substr(5))
                            : standard_gate(step.gate, tdim);
      require(ch.is_unitary(), Errc::NotUnitaryProtocol, "op " + step.gate + " is not unitary");
      u = ch.kraus[0];
    } else {
      require(step.party == Party::Alice, Errc::NotUnitaryProtocol,
              "only Alice's ops are controlled by the classical input");
      ControlledChannel ch = controlled_gate(step.gate, xdim, tdim);
      const KrausChannel& br = ch.branches[x];
      require(br.is_unitary(), Errc::NotUnitaryProtocol,
              "controlled branch of " + step.gate + " is not unitary");
      u = br.kraus[0];
    }
    return u;
  };

  for (const ProtoStep& step : spec.steps) {
    Side& acting = step.party == Party::Alice ? alice : bob;
    Side& other = step.party == Party::Alice ? bob : alice;
    if (step.kind == ProtoStep::Kind::Op) {
      require(step.outs.empty(), Errc::NotUnitaryProtocol,
              "unitary protocols do not relabel registers");
      const ComplexMatrix u = unitary_of(step, acting);
      std::vector<std::size_t> tpos;
      for (const std::string& t : step.targets) {
        const auto it = std::find(acting.labels.begin(), acting.labels.end(), t);
        require(it != acting.labels.end(), Errc::UnknownLabel, "target not on this side: " + t);
        tpos.push_back(static_cast<std::size_t>(it - acting.labels.begin()));
      }
      for (Term& term : terms) {
        std::vector<Cx>& v = step.party == Party::Alice ? term.a : term.b;
        v = apply_unitary_vec(v, acting.dims, tpos, u);
      }
      continue;
    }
    // send: Schmidt-split each term across (kept | payload), then merge the
    // payload into the other side
    if (step.payload.empty()) continue;
    Side kept = subset_side(acting, step.payload, false);
    Side sent = subset_side(acting, step.payload, true);
    const std::size_t dk = side_dim(kept);
    const std::size_t ds = side_dim(sent);
    std::vector<Term> next;
    for (Term& term : terms) {
      std::vector<Cx>& v = step.party == Party::Alice ? term.a : term.b;
      // permute kept-first within the acting side
      std::vector<std::size_t> perm;
      for (const std::string& l : kept.labels)
        perm.push_back(static_cast<std::size_t>(
            std::find(acting.labels.begin(), acting.labels.end(), l) - acting.labels.begin()));
      for (const std::string& l : sent.labels)
        perm.push_back(static_cast<std::size_t>(
            std::find(acting.labels.begin(), acting.labels.end(), l) - acting.labels.begin()));
      std::vector<Cx> w = permute_vector(v, acting.dims, perm);
      ComplexMatrix m(dk, ds);
      std::copy(w.begin(), w.end(), m.a.begin());
      SVDResult dec = svd(m);
      for (std::size_t k = 0; k < dec.singular.size(); ++k) {
        const double coef = term.coef * dec.singular[k];
        if (coef <= 1e-10) continue;
        Term t;
        t.coef = coef;
        std::vector<Cx> uk(dk), vk(ds);
        for (std::size_t i = 0; i < dk; ++i) uk[i] = dec.left.at(i, k);
        for (std::size_t i = 0; i < ds; ++i) vk[i] = std::conj(dec.right.at(i, k));
        std::vector<Cx>& other_vec = step.party == Party::Alice ? term.b : term.a;
        std::vector<Cx> merged = tensor_merge(other_vec, other, vk, sent);
        if (step.party == Party::Alice) {
          t.a = std::move(uk);
          t.b = std::move(merged);
        } else {
          t.b = std::move(uk);
          t.a = std::move(merged);
        }
        next.push_back(std::move(t));
      }
    }
    terms = std::move(next);
    acting = kept;
    other = merged_side(other, sent);
  }

  CommStats stats = comm_stats(spec);
  YaoDecomposition out;
  out.term_bound =
      static_cast<std::size_t>(std::llround(std::exp2(stats.m_a + stats.m_b)));
  out.alice_layout = spec.layout.keep(alice.labels);
  out.bob_layout = spec.layout.keep(bob.labels);
  for (Term& t : terms)
    out.terms.push_back(YaoTerm{t.coef, std::move(t.a), std::move(t.b)});
  return out;
}

}  // namespace qleak
