#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "nmode/genome.hpp"

namespace nmode {

namespace xml {

using Tree = boost::property_tree::ptree;

// Shortest form with 17 significant digits; round-trips every finite double.
inline std::string format_real(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline Tree read(std::string_view text) {
  std::istringstream in{std::string(text)};
  Tree tree;
  try {
    boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::trim_whitespace);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw GenomeError(std::string("malformed XML: ") + e.what());
  }
  return tree;
}

inline const Tree* attributes(const Tree& element) {
  auto it = element.find("<xmlattr>");
  return it == element.not_found() ? nullptr : &element.to_iterator(it)->second;
}

inline std::optional<std::string> attr(const Tree& element, const std::string& name) {
  const auto* a = attributes(element);
  if (!a) return std::nullopt;
  auto v = a->get_optional<std::string>(name);
  if (!v) return std::nullopt;
  return *v;
}

inline std::string require_attr(const Tree& element, const std::string& name,
                                const std::string& where) {
  auto v = attr(element, name);
  if (!v) throw GenomeError("missing attribute '" + name + "' on " + where);
  return *v;
}

inline double real_attr(const Tree& element, const std::string& name, const std::string& where,
                        std::optional<double> fallback = std::nullopt) {
  auto v = attr(element, name);
  if (!v) {
    if (fallback) return *fallback;
    throw GenomeError("missing attribute '" + name + "' on " + where);
  }
  auto d = parse_real(*v);
  if (!d) throw GenomeError("invalid real '" + *v + "' for '" + name + "' on " + where);
  return *d;
}

inline bool bool_attr(const Tree& element, const std::string& name, const std::string& where,
                      bool fallback) {
  auto v = attr(element, name);
  if (!v) return fallback;
  if (*v == "true") return true;
  if (*v == "false") return false;
  throw GenomeError("invalid boolean '" + *v + "' for '" + name + "' on " + where);
}

inline bool is_markup(const std::string& key) {
  return key == "<xmlattr>" || key == "<xmlcomment>";
}

inline NodeSpec parse_node(const Tree& e, const std::string& module) {
  NodeSpec n;
  n.label = require_attr(e, "label", "node in module '" + module + "'");
  const std::string where = "module '" + module + "', node '" + n.label + "'";
  const auto kind_text = require_attr(e, "kind", where);
  auto kind = parse_node_kind(kind_text);
  if (!kind) throw GenomeError("unknown node kind '" + kind_text + "' in " + where);
  n.kind = *kind;
  if (n.kind == NodeKind::connector) {
    n.reference = NodeRef{require_attr(e, "ref-module", where), require_attr(e, "ref-node", where)};
    return n;
  }
  n.position = {real_attr(e, "x", where), real_attr(e, "y", where), real_attr(e, "z", where)};
  n.bias = real_attr(e, "bias", where);
  const auto transfer_text = require_attr(e, "transfer", where);
  auto transfer = parse_transfer(transfer_text);
  if (!transfer) throw GenomeError("unknown transfer '" + transfer_text + "' in " + where);
  n.transfer = *transfer;
  n.binding = attr(e, "binding");
  return n;
}

inline ModuleSpec parse_module(const Tree& e) {
  ModuleSpec m;
  m.name = require_attr(e, "name", "module");
  const std::string where = "module '" + m.name + "'";
  m.evolvable = bool_attr(e, "evolvable", where, true);
  if (auto role = attr(e, "role")) {
    if (*role == "cpg")
      m.role = ModuleRole::cpg;
    else if (*role != "standard")
      throw GenomeError("unknown role '" + *role + "' on " + where);
  }
  for (const auto& [key, child] : e) {
    if (is_markup(key)) continue;
    if (key == "node") {
      m.nodes.push_back(parse_node(child, m.name));
    } else if (key == "edge") {
      EdgeSpec edge;
      edge.source = require_attr(child, "source", "edge in " + where);
      edge.target = require_attr(child, "target", "edge in " + where);
      edge.weight = real_attr(child, "weight", "edge " + edge.source + "->" + edge.target + " in " +
                                                   where);
      m.edges.push_back(std::move(edge));
    } else {
      throw GenomeError("unexpected element <" + key + "> in " + where);
    }
  }
  return m;
}

inline ModuleInstance parse_instance(const Tree& e) {
  ModuleInstance inst;
  inst.template_name = require_attr(e, "template", "instance");
  inst.name = require_attr(e, "name", "instance of '" + inst.template_name + "'");
  const std::string where = "instance '" + inst.name + "'";
  inst.mirror = bool_attr(e, "mirror", where, false);
  for (const auto& [key, child] : e) {
    if (is_markup(key)) continue;
    if (key != "bind") throw GenomeError("unexpected element <" + key + "> in " + where);
    auto from = require_attr(child, "from", "bind in " + where);
    auto to = require_attr(child, "to", "bind in " + where);
    if (!inst.bindings.emplace(from, to).second)
      throw GenomeError("duplicate binding of '" + from + "' in " + where);
  }
  return inst;
}

// Reads one <nmode> element without validating cross-references.
inline Genome parse_genome_element(const Tree& root) {
  const auto version = attr(root, "version");
  if (version && *version != "1") throw GenomeError("unsupported genome version '" + *version + "'");
  Genome g;
  for (const auto& [key, child] : root) {
    if (is_markup(key)) continue;
    if (key == "module") {
      g.modules.push_back(parse_module(child));
    } else if (key == "instance") {
      g.instances.push_back(parse_instance(child));
    } else if (key == "meta") {
      auto k = require_attr(child, "key", "meta");
      g.metadata[k] = attr(child, "value").value_or("");
    } else {
      throw GenomeError("unexpected element <" + key + "> in genome");
    }
  }
  normalize(g);
  validate(g);
  return g;
}

inline void write_module(std::ostream& os, const ModuleSpec& m, const std::string& indent) {
  os << indent << "<module name=\"" << escape(m.name) << "\" evolvable=\""
     << (m.evolvable ? "true" : "false") << '"';
  if (m.role == ModuleRole::cpg) os << " role=\"cpg\"";
  os << ">\n";
  const std::string inner = indent + "  ";
  for (const auto& n : m.nodes) {
    os << inner << "<node label=\"" << escape(n.label) << "\" kind=\"" << to_string(n.kind)
       << '"';
    if (n.kind == NodeKind::connector) {
      os << " ref-module=\"" << escape(n.reference->module) << "\" ref-node=\""
         << escape(n.reference->node) << "\"/>\n";
      continue;
    }
    os << " x=\"" << format_real(n.position.x) << "\" y=\"" << format_real(n.position.y)
       << "\" z=\"" << format_real(n.position.z) << "\" bias=\"" << format_real(n.bias)
       << "\" transfer=\"" << to_string(n.transfer) << '"';
    if (n.binding) os << " binding=\"" << escape(*n.binding) << '"';
    os << "/>\n";
  }
  for (const auto& e : m.edges)
    os << inner << "<edge source=\"" << escape(e.source) << "\" target=\"" << escape(e.target)
       << "\" weight=\"" << format_real(e.weight) << "\"/>\n";
  os << indent << "</module>\n";
}

inline void write_genome_element(std::ostream& os, Genome g, const std::string& indent) {
  normalize(g);
  os << indent << "<nmode version=\"1\">\n";
  const std::string inner = indent + "  ";
  for (const auto& m : g.modules) write_module(os, m, inner);
  for (const auto& inst : g.instances) {
    os << inner << "<instance template=\"" << escape(inst.template_name) << "\" name=\""
       << escape(inst.name) << "\" mirror=\"" << (inst.mirror ? "true" : "false") << "\">\n";
    for (const auto& [from, to] : inst.bindings)
      os << inner << "  <bind from=\"" << escape(from) << "\" to=\"" << escape(to) << "\"/>\n";
    os << inner << "</instance>\n";
  }
  for (const auto& [k, v] : g.metadata)
    os << inner << "<meta key=\"" << escape(k) << "\" value=\"" << escape(v) << "\"/>\n";
  os << indent << "</nmode>\n";
}

}  // namespace xml

// Parses and validates a genome document. Errors carry module/node context.
inline Genome parse_genome(std::string_view text) {
  const auto tree = xml::read(text);
  auto it = tree.find("nmode");
  if (it == tree.not_found()) throw GenomeError("missing <nmode> root element");
  return xml::parse_genome_element(tree.to_iterator(it)->second);
}

// Deterministic: modules by name, nodes by label, edges by (source, target).
inline std::string serialize_genome(const Genome& g) {
  std::ostringstream os;
  xml::write_genome_element(os, g, "");
  return os.str();
}

inline std::string serialize_module(ModuleSpec m) {
  normalize(m);
  std::ostringstream os;
  xml::write_module(os, m, "");
  return os.str();
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

inline Genome load_genome(const std::filesystem::path& path) {
  try {
    return parse_genome(read_text_file(path));
  } catch (const GenomeError& e) {
    throw GenomeError(path.string() + ": " + e.what());
  }
}

inline void save_genome(const std::filesystem::path& path, const Genome& g) {
  write_text_file(path, serialize_genome(g));
}

}  // namespace nmode
