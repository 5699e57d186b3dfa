#include "curvebind/complex.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "curvebind/errors.hpp"

namespace curvebind {

using nlohmann::json;

namespace {
constexpr const char* kSchemaTag = "curvebind-complex/1";
constexpr const char* kEmbeddingMagic = "CBEMB001";

const std::set<std::string>& water_residues() {
    static const std::set<std::string> w = {"HOH", "WAT", "DOD"};
    return w;
}
} // namespace

std::string bond_order_str(BondOrder o) {
    switch (o) {
        case BondOrder::Single: return "1";
        case BondOrder::Double: return "2";
        case BondOrder::Triple: return "3";
        case BondOrder::Aromatic: return "aromatic";
    }
    return "1";
}

BondOrder bond_order_from_str(const std::string& s) {
    if (s == "1") return BondOrder::Single;
    if (s == "2") return BondOrder::Double;
    if (s == "3") return BondOrder::Triple;
    if (s == "aromatic") return BondOrder::Aromatic;
    throw ParseError("bond order must be one of 1, 2, 3, aromatic; got '" + s + "'");
}

const std::vector<Vec3>& ComplexRecord::conformer_or_pose(std::vector<Vec3>& scratch) const {
    if (!input_conformer.empty()) return input_conformer;
    scratch.clear();
    scratch.reserve(ligand_atoms.size());
    for (const auto& a : ligand_atoms) scratch.push_back(a.xyz);
    return scratch;
}

void ComplexRecord::validate() const {
    for (std::size_t i = 0; i < residues.size(); ++i)
        if (!residues[i].ca.finite())
            throw ValidationError(id + ": residue " + std::to_string(i) +
                                  " has non-finite coordinates");
    for (std::size_t i = 0; i < ligand_atoms.size(); ++i) {
        const auto& a = ligand_atoms[i];
        if (!a.xyz.finite())
            throw ValidationError(id + ": atom " + std::to_string(i) +
                                  " has non-finite coordinates");
        if (a.h_count < 0)
            throw ValidationError(id + ": atom " + std::to_string(i) + " negative h_count");
    }
    std::set<std::pair<int, int>> seen;
    const int na = static_cast<int>(ligand_atoms.size());
    for (const auto& b : ligand_bonds) {
        if (b.i < 0 || b.j < 0 || b.i >= na || b.j >= na)
            throw ValidationError(id + ": bond endpoint out of range (" + std::to_string(b.i) +
                                  ", " + std::to_string(b.j) + ")");
        if (b.i == b.j)
            throw ValidationError(id + ": bond self-loop at atom " + std::to_string(b.i));
        const auto e = std::minmax(b.i, b.j);
        if (!seen.insert({e.first, e.second}).second)
            throw ValidationError(id + ": duplicate bond (" + std::to_string(b.i) + ", " +
                                  std::to_string(b.j) + ")");
    }
    if (!input_conformer.empty()) {
        if (input_conformer.size() != ligand_atoms.size())
            throw ValidationError(id + ": input_conformer size does not match atom count");
        for (const auto& p : input_conformer)
            if (!p.finite()) throw ValidationError(id + ": non-finite conformer coordinates");
    }
}

// --------------------------------------------------------------------------
// JSON complex documents
// --------------------------------------------------------------------------

namespace {

Vec3 parse_vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError(where + ": expected a 3-element coordinate array");
    for (const auto& c : j)
        if (!c.is_number()) throw ParseError(where + ": coordinates must be numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ComplexRecord parse_json_complex(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("complex document: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("complex document: top level must be an object");
    if (doc.value("schema", "") != kSchemaTag)
        throw ParseError("complex document: missing or unsupported schema tag (want '" +
                         std::string(kSchemaTag) + "')");

    ComplexRecord rec;
    rec.id = doc.value("id", "");
    if (rec.id.empty()) throw ParseError("complex document: field 'id' is required");
    if (doc.contains("embedding_key")) rec.embedding_key = doc["embedding_key"].get<std::string>();

    if (!doc.contains("residues") || !doc["residues"].is_array())
        throw ParseError(rec.id + ": field 'residues' must be an array");
    for (std::size_t i = 0; i < doc["residues"].size(); ++i) {
        const json& r = doc["residues"][i];
        const std::string where = rec.id + ": residues[" + std::to_string(i) + "]";
        Residue res;
        res.type = r.value("type", "");
        if (res.type.empty()) throw ParseError(where + ": field 'type' is required");
        if (!r.contains("ca")) throw ParseError(where + ": field 'ca' (coordinates) is required");
        res.ca = parse_vec3(r["ca"], where);
        res.chain = r.value("chain", "");
        rec.residues.push_back(std::move(res));
    }

    if (!doc.contains("ligand") || !doc["ligand"].is_object())
        throw ParseError(rec.id + ": field 'ligand' must be an object");
    const json& lig = doc["ligand"];
    if (!lig.contains("atoms") || !lig["atoms"].is_array())
        throw ParseError(rec.id + ": field 'ligand.atoms' must be an array");
    for (std::size_t i = 0; i < lig["atoms"].size(); ++i) {
        const json& a = lig["atoms"][i];
        const std::string where = rec.id + ": ligand.atoms[" + std::to_string(i) + "]";
        LigandAtom atom;
        atom.element = a.value("element", "");
        if (atom.element.empty()) throw ParseError(where + ": field 'element' is required");
        atom.formal_charge = a.value("charge", 0);
        atom.aromatic = a.value("aromatic", false);
        atom.in_ring = a.value("in_ring", false);
        atom.h_count = a.value("h_count", 0);
        if (!a.contains("xyz")) throw ParseError(where + ": field 'xyz' is required");
        atom.xyz = parse_vec3(a["xyz"], where);
        rec.ligand_atoms.push_back(std::move(atom));
    }
    if (lig.contains("bonds")) {
        if (!lig["bonds"].is_array())
            throw ParseError(rec.id + ": field 'ligand.bonds' must be an array");
        for (std::size_t i = 0; i < lig["bonds"].size(); ++i) {
            const json& b = lig["bonds"][i];
            const std::string where = rec.id + ": ligand.bonds[" + std::to_string(i) + "]";
            LigandBond bond;
            if (!b.contains("i") || !b.contains("j"))
                throw ParseError(where + ": fields 'i' and 'j' are required");
            bond.i = b["i"].get<int>();
            bond.j = b["j"].get<int>();
            bond.order = bond_order_from_str(b.value("order", "1"));
            rec.ligand_bonds.push_back(bond);
        }
    }
    if (lig.contains("input_conformer")) {
        for (std::size_t i = 0; i < lig["input_conformer"].size(); ++i)
            rec.input_conformer.push_back(
                parse_vec3(lig["input_conformer"][i],
                           rec.id + ": input_conformer[" + std::to_string(i) + "]"));
    }

    rec.validate();
    return rec;
}

// --------------------------------------------------------------------------
// Minimal PDB: ATOM CA records become residues, non-water HETATM the ligand,
// CONECT the bond list. Convenience path only; full PDB chemistry stays out.
// --------------------------------------------------------------------------

double parse_pdb_coord(const std::string& line, std::size_t col, int lineno) {
    if (line.size() < col + 8)
        throw ParseError("PDB line " + std::to_string(lineno) + ": truncated coordinate field");
    try {
        return std::stod(line.substr(col, 8));
    } catch (const std::exception&) {
        throw ParseError("PDB line " + std::to_string(lineno) + ": bad coordinate field");
    }
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

ComplexRecord parse_pdb_complex(std::istream& in) {
    ComplexRecord rec;
    rec.id = "pdb";
    std::string line;
    int lineno = 0;
    std::map<int, int> serial_to_atom;
    std::vector<std::pair<int, int>> conect;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.rfind("HEADER", 0) == 0 && line.size() >= 66) {
            const std::string idcode = trimmed(line.substr(62, 4));
            if (!idcode.empty()) rec.id = idcode;
            continue;
        }
        if (line.rfind("ATOM", 0) == 0) {
            if (line.size() < 54)
                throw ParseError("PDB line " + std::to_string(lineno) + ": short ATOM record");
            const std::string name = trimmed(line.substr(12, 4));
            if (name != "CA") continue;
            Residue r;
            r.type = trimmed(line.substr(17, 3));
            r.chain = trimmed(line.substr(21, 1));
            r.ca = {parse_pdb_coord(line, 30, lineno), parse_pdb_coord(line, 38, lineno),
                    parse_pdb_coord(line, 46, lineno)};
            rec.residues.push_back(std::move(r));
            continue;
        }
        if (line.rfind("HETATM", 0) == 0) {
            if (line.size() < 54)
                throw ParseError("PDB line " + std::to_string(lineno) + ": short HETATM record");
            const std::string resname = trimmed(line.substr(17, 3));
            if (water_residues().count(resname)) continue;
            LigandAtom a;
            std::string element;
            if (line.size() >= 78) element = trimmed(line.substr(76, 2));
            if (element.empty()) {
                const std::string name = trimmed(line.substr(12, 4));
                for (char c : name)
                    if (std::isalpha(static_cast<unsigned char>(c))) {
                        element.push_back(c);
                        break;
                    }
            }
            if (element.empty())
                throw ParseError("PDB line " + std::to_string(lineno) + ": no element symbol");
            if (element.size() == 2)
                element[1] = static_cast<char>(std::tolower(static_cast<unsigned char>(element[1])));
            a.element = element;
            a.xyz = {parse_pdb_coord(line, 30, lineno), parse_pdb_coord(line, 38, lineno),
                     parse_pdb_coord(line, 46, lineno)};
            if (line.size() >= 80) {
                const std::string ch = trimmed(line.substr(78, 2));
                if (ch.size() == 2 && std::isdigit(static_cast<unsigned char>(ch[0])))
                    a.formal_charge = (ch[1] == '-' ? -1 : 1) * (ch[0] - '0');
            }
            const int serial = std::atoi(line.substr(6, 5).c_str());
            serial_to_atom[serial] = static_cast<int>(rec.ligand_atoms.size());
            rec.ligand_atoms.push_back(std::move(a));
            continue;
        }
        if (line.rfind("CONECT", 0) == 0) {
            const int base = std::atoi(line.substr(6, 5).c_str());
            for (std::size_t col = 11; col + 5 <= line.size(); col += 5) {
                const std::string f = trimmed(line.substr(col, 5));
                if (f.empty()) break;
                conect.push_back({base, std::atoi(f.c_str())});
            }
            continue;
        }
    }
    std::set<std::pair<int, int>> seen;
    for (auto [s1, s2] : conect) {
        auto it1 = serial_to_atom.find(s1);
        auto it2 = serial_to_atom.find(s2);
        if (it1 == serial_to_atom.end() || it2 == serial_to_atom.end()) continue;
        const auto e = std::minmax(it1->second, it2->second);
        if (e.first == e.second) continue;
        if (seen.insert({e.first, e.second}).second)
            rec.ligand_bonds.push_back({e.first, e.second, BondOrder::Single});
    }
    rec.validate();
    return rec;
}

} // namespace

ComplexRecord parse_complex(std::istream& in, ComplexFormat format) {
    switch (format) {
        case ComplexFormat::JsonComplex: return parse_json_complex(in);
        case ComplexFormat::PdbLigand: return parse_pdb_complex(in);
    }
    throw ParseError("unknown complex format");
}

ComplexRecord parse_complex_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open complex file: " + path);
    const bool pdb = path.size() > 4 && (path.substr(path.size() - 4) == ".pdb" ||
                                         path.substr(path.size() - 4) == ".ent");
    ComplexRecord rec = parse_complex(in, pdb ? ComplexFormat::PdbLigand
                                              : ComplexFormat::JsonComplex);
    if (rec.id == "pdb") {
        const auto slash = path.find_last_of("/\\");
        std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
        const auto dot = stem.find_last_of('.');
        if (dot != std::string::npos) stem = stem.substr(0, dot);
        rec.id = stem;
    }
    return rec;
}

std::string serialize_complex(const ComplexRecord& rec) {
    json doc;
    doc["schema"] = kSchemaTag;
    doc["id"] = rec.id;
    if (rec.embedding_key) doc["embedding_key"] = *rec.embedding_key;
    doc["residues"] = json::array();
    for (const auto& r : rec.residues) {
        json jr;
        jr["type"] = r.type;
        if (!r.chain.empty()) jr["chain"] = r.chain;
        jr["ca"] = {r.ca.x, r.ca.y, r.ca.z};
        doc["residues"].push_back(std::move(jr));
    }
    json lig;
    lig["atoms"] = json::array();
    for (const auto& a : rec.ligand_atoms) {
        json ja;
        ja["element"] = a.element;
        ja["charge"] = a.formal_charge;
        ja["aromatic"] = a.aromatic;
        ja["in_ring"] = a.in_ring;
        ja["h_count"] = a.h_count;
        ja["xyz"] = {a.xyz.x, a.xyz.y, a.xyz.z};
        lig["atoms"].push_back(std::move(ja));
    }
    lig["bonds"] = json::array();
    for (const auto& b : rec.ligand_bonds) {
        json jb;
        jb["i"] = b.i;
        jb["j"] = b.j;
        jb["order"] = bond_order_str(b.order);
        lig["bonds"].push_back(std::move(jb));
    }
    if (!rec.input_conformer.empty()) {
        lig["input_conformer"] = json::array();
        for (const auto& p : rec.input_conformer)
            lig["input_conformer"].push_back({p.x, p.y, p.z});
    }
    doc["ligand"] = std::move(lig);
    return doc.dump(2);
}

FilterPolicy parse_filter_policy(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("filter policy: ") + e.what());
    }
    FilterPolicy p;
    p.contact_cutoff = doc.value("contact_cutoff", p.contact_cutoff);
    p.min_contacts_exclusive = doc.value("min_contacts_exclusive", p.min_contacts_exclusive);
    p.max_ligand_atoms_exclusive =
        doc.value("max_ligand_atoms_exclusive", p.max_ligand_atoms_exclusive);
    if (p.contact_cutoff <= 0.0) throw ValidationError("filter policy: cutoff must be > 0");
    if (p.min_contacts_exclusive < 0 || p.max_ligand_atoms_exclusive < 0)
        throw ValidationError("filter policy: thresholds must be >= 0");
    return p;
}

int count_contacts(const ComplexRecord& rec, double cutoff) {
    const double c2 = cutoff * cutoff;
    int count = 0;
    for (const auto& r : rec.residues)
        for (const auto& a : rec.ligand_atoms)
            if (distance2(r.ca, a.xyz) < c2) ++count;
    return count;
}

FilterDecision apply_filters(const ComplexRecord& rec, const FilterPolicy& policy) {
    if (count_contacts(rec, policy.contact_cutoff) <= policy.min_contacts_exclusive)
        return {false, "contacts"};
    if (static_cast<int>(rec.ligand_atoms.size()) >= policy.max_ligand_atoms_exclusive)
        return {false, "ligand_size"};
    return {true, ""};
}

ComplexRecord prune_chains(const ComplexRecord& rec, double cutoff) {
    bool any_chain = false;
    for (const auto& r : rec.residues)
        if (!r.chain.empty()) any_chain = true;
    if (!any_chain) return rec;

    const double c2 = cutoff * cutoff;
    std::set<std::string> near;
    for (const auto& r : rec.residues)
        for (const auto& a : rec.ligand_atoms)
            if (distance2(r.ca, a.xyz) < c2) near.insert(r.chain);

    ComplexRecord out = rec;
    out.residues.clear();
    for (const auto& r : rec.residues)
        if (near.count(r.chain)) out.residues.push_back(r);
    return out;
}

// --------------------------------------------------------------------------
// embedding tables
// --------------------------------------------------------------------------

void EmbeddingTable::insert(const std::string& key, Tensor rows) {
    if (width_ == 0)
        width_ = rows.cols();
    else if (rows.cols() != width_)
        throw ParseError("embedding table: key '" + key + "' has width " +
                         std::to_string(rows.cols()) + ", table width is " +
                         std::to_string(width_));
    rows_[key] = std::move(rows);
}

const Tensor& EmbeddingTable::lookup(const std::string& key) const {
    auto it = rows_.find(key);
    if (it == rows_.end()) throw MissingEmbeddingError("no embedding for key '" + key + "'");
    return it->second;
}

EmbeddingTable load_embedding_table(std::istream& in) {
    // key -> (residue_index -> values)
    std::map<std::string, std::map<int, std::vector<double>>> raw;
    std::string line;
    int lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        int idx = -1;
        if (!(ss >> key >> idx))
            throw ParseError("embedding table line " + std::to_string(lineno) +
                             ": expected 'key index values...'");
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (vals.empty())
            throw ParseError("embedding table line " + std::to_string(lineno) + ": no values");
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw ParseError("embedding table line " + std::to_string(lineno) + ": ragged row (" +
                             std::to_string(vals.size()) + " values, expected " +
                             std::to_string(width) + ")");
        raw[key][idx] = std::move(vals);
    }
    EmbeddingTable table;
    for (auto& [key, rows] : raw) {
        Tensor t(rows.size(), width);
        std::size_t r = 0;
        int expect = 0;
        for (auto& [idx, vals] : rows) {
            if (idx != expect)
                throw ParseError("embedding table: key '" + key +
                                 "' residue indices must be dense from 0");
            for (std::size_t j = 0; j < width; ++j) t(r, j) = vals[j];
            ++r;
            ++expect;
        }
        table.insert(key, std::move(t));
    }
    return table;
}

EmbeddingTable load_embedding_table_binary(std::istream& in, const std::string& key) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kEmbeddingMagic, 8) != 0)
        throw ParseError("embedding matrix: bad magic");
    std::uint32_t width = 0, rows = 0;
    in.read(reinterpret_cast<char*>(&width), 4);
    in.read(reinterpret_cast<char*>(&rows), 4);
    if (!in) throw ParseError("embedding matrix: truncated header");
    Tensor t(rows, width);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    if (!in) throw ParseError("embedding matrix: truncated payload");
    EmbeddingTable table;
    table.insert(key, std::move(t));
    return table;
}

void write_embedding_table_binary(std::ostream& out, const Tensor& rows) {
    out.write(kEmbeddingMagic, 8);
    const std::uint32_t w = static_cast<std::uint32_t>(rows.cols());
    const std::uint32_t r = static_cast<std::uint32_t>(rows.rows());
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&r), 4);
    out.write(reinterpret_cast<const char*>(rows.data()),
              static_cast<std::streamsize>(rows.size() * 8));
}

} // namespace curvebind
