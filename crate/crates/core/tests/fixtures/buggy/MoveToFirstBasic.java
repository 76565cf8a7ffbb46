package org.example.notes;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class MoveToFirstBasic {
    private SQLiteDatabase db;

    public String firstTitle() {
        String title = null;
        Cursor c = db.query("notes", null, null, null, null, null, null);
        if (c.moveToFirst()) { // LEAK: move_to_first
            title = use(c);
            c.close();
        }
        return title;
    }
}
