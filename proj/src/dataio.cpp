#include "mlens/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mlens/rng.hpp"

namespace mlens {

namespace {

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && !s.empty();
}

struct ArffAttribute {
  std::string name;
  bool numeric = true;
  std::vector<std::string> categories;  // nominal only
  int decl_line = 0;
};

struct RawArff {
  std::string path;
  std::string relation;
  std::vector<ArffAttribute> attributes;
  std::vector<std::vector<std::string>> rows;  // cell text per attribute; "?" = missing
  std::vector<int> row_lines;
};

// Reads one possibly-quoted token starting at pos; advances pos past it.
// Quoted tokens understand backslash escapes; unquoted tokens stop at any
// character in `stops`.
std::string read_token(const std::string& s, std::size_t& pos, const char* stops, const std::string& file,
                       int line) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  if (pos >= s.size()) return "";
  std::string out;
  if (s[pos] == '\'' || s[pos] == '"') {
    const char quote = s[pos++];
    bool closed = false;
    while (pos < s.size()) {
      char c = s[pos++];
      if (c == '\\' && pos < s.size()) {
        out.push_back(s[pos++]);
      } else if (c == quote) {
        closed = true;
        break;
      } else {
        out.push_back(c);
      }
    }
    if (!closed) throw ArffError(file, line, "unterminated quoted token");
    return out;
  }
  while (pos < s.size() && std::strchr(stops, s[pos]) == nullptr) out.push_back(s[pos++]);
  return trim(out);
}

std::vector<std::string> parse_nominal_spec(const std::string& body, const std::string& file, int line) {
  // body starts at '{'; must end with '}' with comma-separated categories.
  std::size_t pos = 0;
  while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
  if (pos >= body.size() || body[pos] != '{') throw ArffError(file, line, "expected '{' to open a nominal specification");
  ++pos;
  std::vector<std::string> cats;
  bool closed = false;
  while (pos < body.size()) {
    std::string cat = read_token(body, pos, ",}", file, line);
    while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
    if (pos < body.size() && body[pos] == ',') {
      cats.push_back(cat);
      ++pos;
      continue;
    }
    if (pos < body.size() && body[pos] == '}') {
      cats.push_back(cat);
      closed = true;
      ++pos;
      break;
    }
    break;
  }
  if (!closed) throw ArffError(file, line, "nominal specification is missing its closing '}'");
  std::string tail = trim(body.substr(pos));
  if (!tail.empty()) throw ArffError(file, line, "unexpected text after nominal specification: '" + tail + "'");
  if (cats.empty()) throw ArffError(file, line, "nominal specification declares no categories");
  for (auto& c : cats) {
    if (c.empty()) throw ArffError(file, line, "empty category in nominal specification");
  }
  return cats;
}

void parse_dense_row(const std::string& line_text, int line_no, const RawArff& arff,
                     std::vector<std::string>& cells) {
  const std::size_t arity = arff.attributes.size();
  std::size_t pos = 0;
  cells.clear();
  while (true) {
    std::string cell = read_token(line_text, pos, ",", arff.path, line_no);
    cells.push_back(cell);
    while (pos < line_text.size() && (line_text[pos] == ' ' || line_text[pos] == '\t')) ++pos;
    if (pos < line_text.size() && line_text[pos] == ',') {
      ++pos;
      continue;
    }
    break;
  }
  if (pos < line_text.size())
    throw ArffError(arff.path, line_no, "unexpected text after value list: '" + trim(line_text.substr(pos)) + "'");
  if (cells.size() != arity)
    throw ArffError(arff.path, line_no,
                    "instance has " + std::to_string(cells.size()) + " values, expected " + std::to_string(arity));
}

void parse_sparse_row(const std::string& line_text, int line_no, const RawArff& arff,
                      std::vector<std::string>& cells) {
  const std::size_t arity = arff.attributes.size();
  cells.assign(arity, "");
  // Defaults: numeric 0, nominal first category.
  for (std::size_t a = 0; a < arity; ++a)
    cells[a] = arff.attributes[a].numeric ? "0" : arff.attributes[a].categories.front();

  std::size_t pos = line_text.find('{') + 1;
  std::vector<bool> seen(arity, false);
  bool closed = false;
  while (pos < line_text.size()) {
    while (pos < line_text.size() && (line_text[pos] == ' ' || line_text[pos] == '\t')) ++pos;
    if (pos < line_text.size() && line_text[pos] == '}') {
      closed = true;
      ++pos;
      break;
    }
    std::string index_text = read_token(line_text, pos, " \t,}", arff.path, line_no);
    if (index_text.empty()) throw ArffError(arff.path, line_no, "sparse entry is missing an attribute index");
    char* end = nullptr;
    const long index = std::strtol(index_text.c_str(), &end, 10);
    if (*end != '\0' || index < 0)
      throw ArffError(arff.path, line_no, "bad sparse attribute index '" + index_text + "'");
    if (static_cast<std::size_t>(index) >= arity)
      throw ArffError(arff.path, line_no,
                      "sparse attribute index " + std::to_string(index) + " out of range (have " +
                          std::to_string(arity) + " attributes)");
    if (seen[static_cast<std::size_t>(index)])
      throw ArffError(arff.path, line_no, "duplicate sparse attribute index " + std::to_string(index));
    seen[static_cast<std::size_t>(index)] = true;
    std::string value = read_token(line_text, pos, ",}", arff.path, line_no);
    if (value.empty()) throw ArffError(arff.path, line_no, "sparse entry is missing a value");
    cells[static_cast<std::size_t>(index)] = value;
    while (pos < line_text.size() && (line_text[pos] == ' ' || line_text[pos] == '\t')) ++pos;
    if (pos < line_text.size() && line_text[pos] == ',') ++pos;
  }
  if (!closed) throw ArffError(arff.path, line_no, "sparse instance is missing its closing '}'");
  std::string tail = trim(line_text.substr(pos));
  if (!tail.empty()) throw ArffError(arff.path, line_no, "unexpected text after sparse instance: '" + tail + "'");
}

RawArff read_arff_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArffError(path, 0, "cannot open file");
  RawArff arff;
  arff.path = path;

  std::string line;
  int line_no = 0;
  bool in_data = false;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '%') continue;

    if (!in_data && text[0] == '@') {
      std::size_t pos = 0;
      std::string keyword = read_token(text, pos, " \t", path, line_no);
      const std::string kw = lowercase(keyword);
      if (kw == "@relation") {
        arff.relation = read_token(text, pos, " \t", path, line_no);
        if (arff.relation.empty()) throw ArffError(path, line_no, "@relation needs a name");
      } else if (kw == "@attribute") {
        ArffAttribute attr;
        attr.decl_line = line_no;
        attr.name = read_token(text, pos, " \t", path, line_no);
        if (attr.name.empty()) throw ArffError(path, line_no, "@attribute needs a name");
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
        std::string type_body = text.substr(pos);
        if (trim(type_body).empty()) throw ArffError(path, line_no, "attribute '" + attr.name + "' has no type");
        if (trim(type_body)[0] == '{') {
          attr.numeric = false;
          attr.categories = parse_nominal_spec(type_body, path, line_no);
        } else {
          const std::string type_name = lowercase(trim(type_body));
          if (type_name == "numeric" || type_name == "real" || type_name == "integer") {
            attr.numeric = true;
          } else {
            throw ArffError(path, line_no,
                            "unsupported attribute type '" + trim(type_body) + "' (numeric, real, integer or {...})");
          }
        }
        arff.attributes.push_back(std::move(attr));
      } else if (kw == "@data") {
        if (arff.attributes.empty()) throw ArffError(path, line_no, "@data reached with no attributes declared");
        in_data = true;
      } else {
        throw ArffError(path, line_no, "unknown declaration '" + keyword + "'");
      }
      continue;
    }

    if (!in_data) throw ArffError(path, line_no, "instance row before @data");

    if (text[0] == '{') {
      parse_sparse_row(text, line_no, arff, cells);
    } else {
      parse_dense_row(text, line_no, arff, cells);
    }
    arff.rows.push_back(cells);
    arff.row_lines.push_back(line_no);
  }
  if (!in_data) throw ArffError(path, line_no, "file has no @data section");
  if (arff.rows.empty()) throw ArffError(path, line_no, "no instance rows after @data");
  return arff;
}

// Maps a binary label attribute's cell to 0/1. Accepts numeric 0/1 and the
// nominal spellings 0/1, false/true, no/yes (case-insensitive).
int label_cell_value(const RawArff& arff, const ArffAttribute& attr, const std::string& cell, int line_no) {
  if (cell == "?")
    throw ArffError(arff.path, line_no, "missing value in label attribute '" + attr.name + "'");
  const std::string v = lowercase(cell);
  if (v == "0" || v == "false" || v == "no") return 0;
  if (v == "1" || v == "true" || v == "yes") return 1;
  double num = 0.0;
  if (attr.numeric && parse_double(cell, num)) {
    if (num == 0.0) return 0;
    if (num == 1.0) return 1;
  }
  throw ArffError(arff.path, line_no, "label attribute '" + attr.name + "' has non-binary value '" + cell + "'");
}

Dataset encode_dataset(const RawArff& arff, const std::vector<int>& label_attrs, const std::string& name,
                       const std::string& provenance) {
  const std::size_t arity = arff.attributes.size();
  std::vector<bool> is_label(arity, false);
  for (int a : label_attrs) is_label[static_cast<std::size_t>(a)] = true;

  Dataset ds;
  ds.name = name;
  ds.provenance = provenance;

  std::vector<int> feature_attrs;
  for (std::size_t a = 0; a < arity; ++a)
    if (!is_label[a]) feature_attrs.push_back(static_cast<int>(a));
  if (feature_attrs.empty()) throw ArffError(arff.path, 0, "no feature attributes remain after label selection");

  // Nominal features get a dedicated "missing" category only when a missing
  // value actually occurs in that column.
  std::vector<bool> has_missing(arity, false);
  for (std::size_t r = 0; r < arff.rows.size(); ++r)
    for (int a : feature_attrs)
      if (arff.rows[r][static_cast<std::size_t>(a)] == "?") has_missing[static_cast<std::size_t>(a)] = true;

  // Column layout.
  std::vector<std::pair<int, int>> encoded;  // (attribute, category index or -1 for numeric)
  for (int a : feature_attrs) {
    const auto& attr = arff.attributes[static_cast<std::size_t>(a)];
    if (attr.numeric) {
      ds.feature_names.push_back(attr.name);
      ds.feature_numeric_origin.push_back(true);
      encoded.emplace_back(a, -1);
      ++ds.raw_numeric_attributes;
    } else {
      for (std::size_t c = 0; c < attr.categories.size(); ++c) {
        ds.feature_names.push_back(attr.name + "=" + attr.categories[c]);
        ds.feature_numeric_origin.push_back(false);
        encoded.emplace_back(a, static_cast<int>(c));
      }
      if (has_missing[static_cast<std::size_t>(a)]) {
        ds.feature_names.push_back(attr.name + "=?");
        ds.feature_numeric_origin.push_back(false);
        encoded.emplace_back(a, static_cast<int>(attr.categories.size()));
      }
      ++ds.raw_nominal_attributes;
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(arff.rows.size());
  ds.features.resize(n, static_cast<Eigen::Index>(encoded.size()));
  ds.labels.resize(n, static_cast<Eigen::Index>(label_attrs.size()));
  for (std::size_t li = 0; li < label_attrs.size(); ++li)
    ds.label_names.push_back(arff.attributes[static_cast<std::size_t>(label_attrs[li])].name);

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = arff.rows[static_cast<std::size_t>(r)];
    const int line_no = arff.row_lines[static_cast<std::size_t>(r)];
    for (Eigen::Index col = 0; col < static_cast<Eigen::Index>(encoded.size()); ++col) {
      const auto [a, cat] = encoded[static_cast<std::size_t>(col)];
      const auto& attr = arff.attributes[static_cast<std::size_t>(a)];
      const std::string& cell = row[static_cast<std::size_t>(a)];
      if (cat < 0) {
        if (cell == "?") {
          ds.features(r, col) = std::numeric_limits<double>::quiet_NaN();
        } else {
          double value = 0.0;
          if (!parse_double(cell, value))
            throw ArffError(arff.path, line_no,
                            "non-numeric value '" + cell + "' for numeric attribute '" + attr.name + "'");
          ds.features(r, col) = value;
        }
      } else {
        int hit;
        if (cell == "?") {
          hit = static_cast<int>(attr.categories.size());  // the "missing" category
        } else {
          const auto it = std::find(attr.categories.begin(), attr.categories.end(), cell);
          if (it == attr.categories.end())
            throw ArffError(arff.path, line_no,
                            "unknown nominal category '" + cell + "' for attribute '" + attr.name + "'");
          hit = static_cast<int>(it - attr.categories.begin());
        }
        ds.features(r, col) = hit == cat ? 1.0 : 0.0;
      }
    }
    for (std::size_t li = 0; li < label_attrs.size(); ++li) {
      const auto& attr = arff.attributes[static_cast<std::size_t>(label_attrs[li])];
      ds.labels(r, static_cast<Eigen::Index>(li)) =
          label_cell_value(arff, attr, row[static_cast<std::size_t>(label_attrs[li])], line_no);
    }
  }
  return ds;
}

std::string xml_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      const std::size_t semi = s.find(';', i);
      if (semi != std::string::npos) {
        const std::string entity = s.substr(i + 1, semi - i - 1);
        i = semi + 1;
        if (entity == "amp") out.push_back('&');
        else if (entity == "lt") out.push_back('<');
        else if (entity == "gt") out.push_back('>');
        else if (entity == "quot") out.push_back('"');
        else if (entity == "apos") out.push_back('\'');
        else out += "&" + entity + ";";
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

}  // namespace

std::vector<std::string> parse_label_header(const std::string& xml_path) {
  std::ifstream in(xml_path);
  if (!in) throw ArffError(xml_path, 0, "cannot open label header");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find("<label", pos)) != std::string::npos) {
    const std::size_t close = text.find('>', pos);
    if (close == std::string::npos) break;
    const std::string tag = text.substr(pos, close - pos);
    const std::size_t name_at = tag.find("name");
    if (name_at != std::string::npos) {
      std::size_t q = tag.find_first_of("\"'", name_at);
      if (q != std::string::npos) {
        const char quote = tag[q];
        const std::size_t q2 = tag.find(quote, q + 1);
        if (q2 != std::string::npos) names.push_back(xml_decode(tag.substr(q + 1, q2 - q - 1)));
      }
    }
    pos = close + 1;
  }
  if (names.empty()) throw ArffError(xml_path, 0, "no <label name=\"...\"> entries found");
  return names;
}

Dataset parse_arff(const std::string& arff_path, const std::string& xml_path) {
  const RawArff arff = read_arff_raw(arff_path);
  const std::vector<std::string> label_names = parse_label_header(xml_path);

  std::vector<int> label_attrs;
  for (const auto& name : label_names) {
    int found = -1;
    for (std::size_t a = 0; a < arff.attributes.size(); ++a)
      if (arff.attributes[a].name == name) {
        found = static_cast<int>(a);
        break;
      }
    if (found < 0)
      throw ArffError(xml_path, 0, "label '" + name + "' from the header is not an attribute of " + arff_path);
    label_attrs.push_back(found);
  }

  std::string stem = arff_path;
  const std::size_t slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);

  return encode_dataset(arff, label_attrs, stem, "arff:" + arff_path + " xml:" + xml_path);
}

Dataset parse_arff_counted(const std::string& arff_path, int label_count, LabelLayout layout) {
  const RawArff arff = read_arff_raw(arff_path);
  const int arity = static_cast<int>(arff.attributes.size());
  if (label_count < 1) throw ArffError(arff_path, 0, "label count must be >= 1");
  if (label_count >= arity)
    throw ArffError(arff_path, 0,
                    "label count " + std::to_string(label_count) + " leaves no feature attributes (file has " +
                        std::to_string(arity) + ")");
  std::vector<int> label_attrs;
  for (int i = 0; i < label_count; ++i)
    label_attrs.push_back(layout == LabelLayout::Trailing ? arity - label_count + i : i);

  std::string stem = arff_path;
  const std::size_t slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const std::size_t dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);

  return encode_dataset(arff, label_attrs, stem,
                        "arff:" + arff_path + " labels:" + std::to_string(label_count) +
                            (layout == LabelLayout::Trailing ? " trailing" : " leading"));
}

namespace {

bool needs_csv_quoting(const std::string& s) {
  return s.find_first_of(",\"\n") != std::string::npos;
}

std::string csv_quote(const std::string& s) {
  if (!needs_csv_quoting(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& file, int line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size()) {
      if (quoted) throw ArffError(file, line_no, "unterminated quoted CSV cell");
      cells.push_back(cell);
      break;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  return cells;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  bool first = true;
  for (std::size_t c = 0; c < dataset.feature_names.size(); ++c) {
    const std::string name =
        (dataset.feature_numeric_origin[c] ? "" : "onehot:") + dataset.feature_names[c];
    out << (first ? "" : ",") << csv_quote(name);
    first = false;
  }
  for (const auto& name : dataset.label_names) out << (first ? "" : ",") << csv_quote("label:" + name);
  out << '\n';
  for (Eigen::Index r = 0; r < dataset.features.rows(); ++r) {
    first = true;
    for (Eigen::Index c = 0; c < dataset.features.cols(); ++c) {
      out << (first ? "" : ",") << format_g17(dataset.features(r, c));
      first = false;
    }
    for (Eigen::Index c = 0; c < dataset.labels.cols(); ++c) out << (first ? "" : ",") << dataset.labels(r, c);
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ArffError(path, 0, "cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw ArffError(path, 0, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  Dataset ds;
  ds.name = name;
  ds.provenance = "csv:" + path;
  const std::vector<std::string> header = split_csv_line(line, path, 1);
  std::vector<bool> is_label;
  for (const auto& col : header) {
    if (col.rfind("label:", 0) == 0) {
      ds.label_names.push_back(col.substr(6));
      is_label.push_back(true);
    } else if (col.rfind("onehot:", 0) == 0) {
      ds.feature_names.push_back(col.substr(7));
      ds.feature_numeric_origin.push_back(false);
      is_label.push_back(false);
    } else {
      ds.feature_names.push_back(col);
      ds.feature_numeric_origin.push_back(true);
      is_label.push_back(false);
    }
  }
  if (ds.label_names.empty()) throw ArffError(path, 1, "header has no label: columns");
  if (ds.feature_names.empty()) throw ArffError(path, 1, "header has no feature columns");

  std::vector<std::vector<double>> feat_rows;
  std::vector<std::vector<int>> label_rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line, path, line_no);
    if (cells.size() != header.size())
      throw ArffError(path, line_no,
                      "row has " + std::to_string(cells.size()) + " cells, header has " +
                          std::to_string(header.size()));
    std::vector<double> f;
    std::vector<int> l;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (is_label[c]) {
        if (cells[c] == "0") l.push_back(0);
        else if (cells[c] == "1") l.push_back(1);
        else throw ArffError(path, line_no, "label cell '" + cells[c] + "' is not 0/1");
      } else {
        double v = 0.0;
        if (!parse_double(cells[c], v))
          throw ArffError(path, line_no, "non-numeric feature cell '" + cells[c] + "'");
        f.push_back(v);
      }
    }
    feat_rows.push_back(std::move(f));
    label_rows.push_back(std::move(l));
  }
  if (feat_rows.empty()) throw ArffError(path, line_no, "no data rows");

  ds.features.resize(static_cast<Eigen::Index>(feat_rows.size()), static_cast<Eigen::Index>(ds.feature_names.size()));
  ds.labels.resize(static_cast<Eigen::Index>(label_rows.size()), static_cast<Eigen::Index>(ds.label_names.size()));
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c)
      ds.features(r, c) = feat_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    for (Eigen::Index c = 0; c < ds.labels.cols(); ++c)
      ds.labels(r, c) = label_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return ds;
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArffError(path, 0, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    for (char& c : text)
      if (c == ',' || c == '\t' || c == ';') c = ' ';
    std::istringstream cells(text);
    std::vector<double> row;
    std::string cell;
    while (cells >> cell) {
      double v = 0.0;
      if (!parse_double(cell, v))
        throw ArffError(path, line_no, "non-numeric cell '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ArffError(path, line_no,
                      "row has " + std::to_string(row.size()) + " columns, expected " +
                          std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArffError(path, line_no, "no rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("Standardizer: column count mismatch");
  Eigen::MatrixXd out = x;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (!transformed[static_cast<std::size_t>(c)]) continue;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      double v = out(r, c);
      if (std::isnan(v)) v = mean[c];  // training-fold mean imputation
      out(r, c) = scale[c] > 0.0 ? (v - mean[c]) / scale[c] : 0.0;
    }
  }
  return out;
}

Standardizer fit_standardizer(const Dataset& dataset, const std::vector<int>& train_indices) {
  if (train_indices.empty()) throw std::invalid_argument("fit_standardizer: empty training fold");
  const Eigen::Index d = dataset.features.cols();
  Standardizer s;
  s.mean = Eigen::ArrayXd::Zero(d);
  s.scale = Eigen::ArrayXd::Ones(d);
  s.transformed.assign(static_cast<std::size_t>(d), false);

  for (Eigen::Index c = 0; c < d; ++c) {
    if (!dataset.feature_numeric_origin[static_cast<std::size_t>(c)]) continue;
    s.transformed[static_cast<std::size_t>(c)] = true;
    double sum = 0.0, sum2 = 0.0;
    Eigen::Index count = 0;
    for (int r : train_indices) {
      const double v = dataset.features(r, c);
      if (std::isnan(v)) continue;
      sum += v;
      sum2 += v * v;
      ++count;
    }
    if (count == 0) {
      s.mean[c] = 0.0;
      s.scale[c] = 0.0;  // all-missing: every value collapses to 0
      continue;
    }
    const double mean = sum / static_cast<double>(count);
    // Sample (n-1) standard deviation; constant or singleton columns get
    // scale 0 and collapse to 0 in apply().
    const double var =
        count > 1 ? std::max(0.0, (sum2 - static_cast<double>(count) * mean * mean) / static_cast<double>(count - 1))
                  : 0.0;
    s.mean[c] = mean;
    s.scale[c] = std::sqrt(var);
  }
  return s;
}

std::vector<int> FoldPlan::train_indices(int fold) const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> FoldPlan::test_indices(int fold) const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<FoldPlan> split_folds(Eigen::Index n, int k, std::uint64_t seed, int repeats) {
  if (k < 2) throw std::invalid_argument("split_folds: need k >= 2");
  if (static_cast<Eigen::Index>(k) > n) throw std::invalid_argument("split_folds: k exceeds instance count");
  if (repeats < 1) throw std::invalid_argument("split_folds: need repeats >= 1");

  std::vector<FoldPlan> plans;
  for (int rep = 0; rep < repeats; ++rep) {
    Rng g(derive_seed(seed, "folds", rep));
    std::vector<int> perm = random_permutation(g, static_cast<int>(n));
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.repeat_index = rep;
    plan.assignments.assign(static_cast<std::size_t>(n), 0);
    // First n % k folds get the extra instance.
    const Eigen::Index base = n / k, extra = n % k;
    Eigen::Index at = 0;
    for (int fold = 0; fold < k; ++fold) {
      const Eigen::Index size = base + (fold < extra ? 1 : 0);
      for (Eigen::Index i = 0; i < size; ++i)
        plan.assignments[static_cast<std::size_t>(perm[static_cast<std::size_t>(at++)])] = fold;
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace mlens
