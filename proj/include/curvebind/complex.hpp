#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curvebind/geom.hpp"
#include "curvebind/tensor.hpp"

namespace curvebind {

enum class BondOrder { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

std::string bond_order_str(BondOrder o);
BondOrder bond_order_from_str(const std::string& s);

struct Residue {
    std::string type;  // 3-letter code
    Vec3 ca;           // C-alpha position, Angstrom
    std::string chain; // optional, empty when absent
};

struct LigandAtom {
    std::string element;
    int formal_charge = 0;
    bool aromatic = false;
    bool in_ring = false;
    int h_count = 0;
    Vec3 xyz; // bound pose, Angstrom
};

struct LigandBond {
    int i = 0, j = 0;
    BondOrder order = BondOrder::Single;
};

// One protein-ligand complex. Ligand coordinates are the reference pose;
// input_conformer (optional) carries the geometry that docking starts from.
struct ComplexRecord {
    std::string id;
    std::vector<Residue> residues;
    std::vector<LigandAtom> ligand_atoms;
    std::vector<LigandBond> ligand_bonds;
    std::optional<std::string> embedding_key;
    std::vector<Vec3> input_conformer; // empty: use the reference pose

    std::size_t n_residues() const { return residues.size(); }
    std::size_t n_atoms() const { return ligand_atoms.size(); }
    const std::vector<Vec3>& conformer_or_pose(std::vector<Vec3>& scratch) const;
    void validate() const; // throws ValidationError
};

enum class ComplexFormat { JsonComplex, PdbLigand };

ComplexRecord parse_complex(std::istream& in, ComplexFormat format);
ComplexRecord parse_complex_file(const std::string& path);
std::string serialize_complex(const ComplexRecord& rec);

struct FilterPolicy {
    double contact_cutoff = 10.0;       // Angstrom, strict <
    int min_contacts_exclusive = 5;     // drop when contacts <= this
    int max_ligand_atoms_exclusive = 100; // drop when atoms >= this
};

FilterPolicy parse_filter_policy(std::istream& in);

struct FilterDecision {
    bool keep = true;
    std::string reason; // "contacts" or "ligand_size" when dropped
};

// (residue, atom) pairs with distance strictly below cutoff
int count_contacts(const ComplexRecord& rec, double cutoff);

FilterDecision apply_filters(const ComplexRecord& rec, const FilterPolicy& policy);

// Drop chains with no C-alpha strictly within cutoff of any ligand atom.
// Records without chain ids are returned unchanged.
ComplexRecord prune_chains(const ComplexRecord& rec, double cutoff = 10.0);

// key -> per-residue embedding rows of uniform width
class EmbeddingTable {
public:
    void insert(const std::string& key, Tensor rows);
    const Tensor& lookup(const std::string& key) const; // MissingEmbeddingError
    bool contains(const std::string& key) const { return rows_.count(key) > 0; }
    std::size_t entries() const { return rows_.size(); }
    std::size_t width() const { return width_; } // 0 when empty

private:
    std::map<std::string, Tensor> rows_;
    std::size_t width_ = 0;
};

// TSV rows: key, residue_index, values...
EmbeddingTable load_embedding_table(std::istream& in);

// 16-byte header {magic "CBEMB001", u32 width, u32 rows}, then row-major f64.
// The whole file is one key's matrix.
EmbeddingTable load_embedding_table_binary(std::istream& in, const std::string& key);
void write_embedding_table_binary(std::ostream& out, const Tensor& rows);

} // namespace curvebind
